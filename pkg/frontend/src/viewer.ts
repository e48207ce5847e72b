/** three.js scene: orbit-controlled render of the current hair mesh. */

import * as THREE from "three";
import { OrbitControls } from "three/examples/jsm/controls/OrbitControls.js";
import { MeshPayload } from "./api";

export class Viewer {
  private readonly scene = new THREE.Scene();
  private readonly camera: THREE.PerspectiveCamera;
  private readonly renderer: THREE.WebGLRenderer;
  private readonly controls: OrbitControls;
  private hair: THREE.Mesh | null = null;

  constructor(container: HTMLElement) {
    this.scene.background = new THREE.Color(0x1b1e24);
    this.camera = new THREE.PerspectiveCamera(
      45,
      container.clientWidth / container.clientHeight,
      0.01,
      100,
    );
    this.camera.position.set(0, -4, 1.5);
    this.camera.up.set(0, 0, 1);

    this.renderer = new THREE.WebGLRenderer({ antialias: true });
    this.renderer.setSize(container.clientWidth, container.clientHeight);
    this.renderer.setPixelRatio(window.devicePixelRatio);
    container.appendChild(this.renderer.domElement);

    this.controls = new OrbitControls(this.camera, this.renderer.domElement);
    this.controls.enableDamping = true;

    this.scene.add(new THREE.AmbientLight(0xffffff, 0.55));
    const key = new THREE.DirectionalLight(0xffffff, 1.1);
    key.position.set(2, -3, 4);
    this.scene.add(key);
    const fill = new THREE.DirectionalLight(0x8899bb, 0.4);
    fill.position.set(-3, 2, -1);
    this.scene.add(fill);

    window.addEventListener("resize", () => {
      this.camera.aspect = container.clientWidth / container.clientHeight;
      this.camera.updateProjectionMatrix();
      this.renderer.setSize(container.clientWidth, container.clientHeight);
    });

    const animate = () => {
      requestAnimationFrame(animate);
      this.controls.update();
      this.renderer.render(this.scene, this.camera);
    };
    animate();
  }

  /** Replace the displayed hair mesh with a new payload. */
  setMesh(payload: MeshPayload): void {
    const geometry = new THREE.BufferGeometry();
    geometry.setAttribute(
      "position",
      new THREE.Float32BufferAttribute(payload.positions, 3),
    );
    geometry.setAttribute(
      "color",
      new THREE.Float32BufferAttribute(payload.colors, 3),
    );
    geometry.setIndex(payload.faces);
    geometry.computeVertexNormals();

    const material = new THREE.MeshStandardMaterial({
      vertexColors: true,
      roughness: 0.75,
      metalness: 0.0,
      side: THREE.DoubleSide,
    });

    if (this.hair !== null) {
      this.scene.remove(this.hair);
      this.hair.geometry.dispose();
      (this.hair.material as THREE.Material).dispose();
    }
    this.hair = new THREE.Mesh(geometry, material);
    this.scene.add(this.hair);
  }

  /** Bounding-box diagonal of the displayed mesh (for the readout). */
  bboxDiagonal(): number {
    if (this.hair === null) return 0;
    const box = new THREE.Box3().setFromObject(this.hair);
    return box.min.distanceTo(box.max);
  }
}
