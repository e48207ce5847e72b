import { fetchMeta, fetchSamples } from "./api";
import { SynthesisQueue } from "./requestQueue";
import { buildPanel, createBanner, initialState, toParams } from "./ui";
import { Viewer } from "./viewer";

async function start(): Promise<void> {
  const viewport = document.getElementById("viewport")!;
  const panel = document.getElementById("panel")!;
  const status = document.getElementById("status")!;
  const banner = createBanner(document.body);

  const viewer = new Viewer(viewport);
  const meta = await fetchMeta();
  const samples = await fetchSamples();
  const state = initialState(meta, samples);

  const queue = new SynthesisQueue({
    onMesh: (mesh) => {
      banner(null);
      viewer.setMesh(mesh);
      const faces = mesh.faces.length / 3;
      status.textContent =
        `${faces} faces · bbox diag ${viewer.bboxDiagonal().toFixed(3)}`;
    },
    onError: (message) => banner(message),
    onBusy: (busy) => {
      status.classList.toggle("busy", busy);
    },
  });

  buildPanel(panel, meta, samples, state, (immediate) => {
    if (immediate) void queue.sendNow(toParams(state));
    else queue.schedule(toParams(state));
  });

  const download = document.getElementById("download")!;
  download.addEventListener("click", async () => {
    const res = await fetch("/api/synthesize", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ ...toParams(state), format: "obj" }),
    });
    if (!res.ok) {
      banner(`download failed: ${res.status}`);
      return;
    }
    const url = URL.createObjectURL(await res.blob());
    const a = document.createElement("a");
    a.href = url;
    a.download = "hair.obj";
    a.click();
    URL.revokeObjectURL(url);
  });

  // initial render: the mean hairstyle
  void queue.sendNow(toParams(state));
}

start().catch((err) => {
  const banner = createBanner(document.body);
  banner(err instanceof Error ? err.message : String(err));
});
