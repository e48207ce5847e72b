/** Control panel: mode sliders from metadata, thickness, flip, fusion
 * weights, lighting presets, error banner. Framework-free DOM. */

import { FuseSpec, Meta, SynthesisParams } from "./api";

const DEFAULT_VISIBLE_MODES = 8;

/** Order-2 SH lighting presets as flat 9x3 row-major arrays. */
export const SH_PRESETS: Record<string, number[] | undefined> = {
  none: undefined,
  // constant white: only the DC band
  studio: [2.0, 2.0, 2.0, ...new Array(24).fill(0)],
  // warm key from +z with a cool fill
  sunset: [
    1.8, 1.5, 1.2,
    0, 0, 0,
    0.8, 0.5, 0.2,
    0, 0, 0,
    ...new Array(15).fill(0),
  ],
};

export interface PanelState {
  betaShape: number[];
  betaAlb: number[];
  betaS: number;
  flip: boolean;
  fuseWeights: Map<string, number>;
  shPreset: string;
}

export function initialState(meta: Meta, samples: string[]): PanelState {
  return {
    betaShape: new Array(meta.k).fill(0),
    betaAlb: new Array(meta.k_a).fill(0),
    betaS: 1,
    flip: false,
    fuseWeights: new Map(samples.map((s) => [s, 0])),
    shPreset: "none",
  };
}

export function toParams(state: PanelState): SynthesisParams {
  const active = [...state.fuseWeights.entries()].filter(([, w]) => w !== 0);
  const fuse: FuseSpec | undefined =
    active.length > 0
      ? { sample_ids: active.map(([s]) => s), weights: active.map(([, w]) => w) }
      : undefined;
  return {
    beta_shape: state.betaShape,
    beta_alb: state.betaAlb,
    beta_s: state.betaS,
    flip: state.flip,
    fuse,
    sh: SH_PRESETS[state.shPreset],
  };
}

function slider(
  label: string,
  min: number,
  max: number,
  value: number,
  onInput: (v: number) => void,
): HTMLElement {
  const row = document.createElement("label");
  row.className = "slider-row";
  const text = document.createElement("span");
  text.textContent = label;
  const input = document.createElement("input");
  input.type = "range";
  input.min = String(min);
  input.max = String(max);
  input.step = "0.01";
  input.value = String(value);
  const readout = document.createElement("span");
  readout.className = "readout";
  readout.textContent = value.toFixed(2);
  input.addEventListener("input", () => {
    const v = Number(input.value);
    readout.textContent = v.toFixed(2);
    onInput(v);
  });
  row.append(text, input, readout);
  return row;
}

export function buildPanel(
  root: HTMLElement,
  meta: Meta,
  samples: string[],
  state: PanelState,
  onChange: (immediate: boolean) => void,
): void {
  const section = (title: string): HTMLElement => {
    const box = document.createElement("section");
    const h = document.createElement("h3");
    h.textContent = title;
    box.appendChild(h);
    root.appendChild(box);
    return box;
  };

  const range = meta.slider_range;
  const shape = section(`Shape modes (±${range}σ)`);
  const advanced = document.createElement("div");
  advanced.hidden = meta.k > DEFAULT_VISIBLE_MODES;
  for (let i = 0; i < meta.k; i++) {
    const row = slider(`mode ${i + 1}`, -range, range, 0, (v) => {
      state.betaShape[i] = v;
      onChange(false);
    });
    (i < DEFAULT_VISIBLE_MODES ? shape : advanced).appendChild(row);
  }
  if (meta.k > DEFAULT_VISIBLE_MODES) {
    const toggle = document.createElement("button");
    toggle.textContent = `Advanced (${meta.k - DEFAULT_VISIBLE_MODES} more)`;
    toggle.addEventListener("click", () => {
      advanced.hidden = !advanced.hidden;
    });
    shape.append(toggle, advanced);
  }

  if (meta.k_a > 0) {
    const albedo = section("Albedo modes");
    for (let i = 0; i < meta.k_a; i++) {
      albedo.appendChild(
        slider(`color ${i + 1}`, -range, range, 0, (v) => {
          state.betaAlb[i] = v;
          onChange(false);
        }),
      );
    }
  }

  const style = section("Style");
  style.appendChild(
    slider("thickness", 0.25, 3, 1, (v) => {
      state.betaS = v;
      onChange(false);
    }),
  );
  const flipRow = document.createElement("label");
  flipRow.className = "toggle-row";
  const flip = document.createElement("input");
  flip.type = "checkbox";
  flip.addEventListener("change", () => {
    state.flip = flip.checked;
    onChange(true);
  });
  flipRow.append(flip, document.createTextNode(" mirror left/right"));
  style.appendChild(flipRow);

  if (samples.length > 0) {
    const fusion = section("Fuse with samples");
    for (const id of samples) {
      fusion.appendChild(
        slider(id, 0, 1, 0, (v) => {
          state.fuseWeights.set(id, v);
          onChange(false);
        }),
      );
    }
  }

  const lighting = section("Lighting");
  const select = document.createElement("select");
  for (const name of Object.keys(SH_PRESETS)) {
    const opt = document.createElement("option");
    opt.value = name;
    opt.textContent = name;
    select.appendChild(opt);
  }
  select.addEventListener("change", () => {
    state.shPreset = select.value;
    onChange(true);
  });
  lighting.appendChild(select);
}

export function createBanner(root: HTMLElement): (message: string | null) => void {
  const banner = document.createElement("div");
  banner.className = "error-banner";
  banner.hidden = true;
  root.appendChild(banner);
  let timer: ReturnType<typeof setTimeout> | null = null;
  return (message) => {
    if (timer !== null) clearTimeout(timer);
    if (message === null) {
      banner.hidden = true;
      return;
    }
    banner.textContent = message;
    banner.hidden = false;
    timer = setTimeout(() => {
      banner.hidden = true;
    }, 6000);
  };
}
