/** Typed wrappers over the synthesis service HTTP API. */

export interface Meta {
  n_s: number;
  n_r: number;
  k: number;
  k_a: number;
  sv_shape: number[];
  sv_alb: number[];
  slider_range: number;
}

export interface FuseSpec {
  sample_ids: string[];
  weights: number[];
}

export interface SynthesisParams {
  beta_shape: number[];
  beta_alb: number[];
  beta_s: number;
  flip: boolean;
  fuse?: FuseSpec;
  sh?: number[];
  voxel?: number;
  smooth?: number;
}

export interface MeshPayload {
  positions: number[];
  faces: number[];
  colors: number[];
}

export async function fetchMeta(base = ""): Promise<Meta> {
  const res = await fetch(`${base}/api/meta`);
  if (!res.ok) throw new Error(`meta request failed: ${res.status}`);
  return res.json();
}

export async function fetchSamples(base = ""): Promise<string[]> {
  const res = await fetch(`${base}/api/samples`);
  if (!res.ok) throw new Error(`samples request failed: ${res.status}`);
  return (await res.json()).samples;
}

/** Human-readable message out of a service error body. */
export function describeError(status: number, body: unknown): string {
  if (body && typeof body === "object" && "errors" in body) {
    const errors = (body as { errors: Record<string, string> }).errors;
    const parts = Object.entries(errors).map(([k, v]) => `${k}: ${v}`);
    if (parts.length > 0) return parts.join("; ");
  }
  return `request failed with status ${status}`;
}
