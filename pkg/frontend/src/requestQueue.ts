/** Debounced, sequence-ordered synthesis requests.
 *
 * Slider drags fire many parameter changes; each `schedule` call restarts a
 * 150 ms debounce window, so only the settled value is sent. Responses carry
 * the sequence number of the request that produced them and are applied only
 * if that number exceeds the last applied one — a slow early response can
 * never overwrite a newer mesh. Errors surface through a callback and never
 * block later requests.
 */

import { MeshPayload, SynthesisParams, describeError } from "./api";

export const DEBOUNCE_MS = 150;

export interface QueueCallbacks {
  onMesh: (mesh: MeshPayload, seq: number) => void;
  onError: (message: string) => void;
  onBusy?: (busy: boolean) => void;
}

type FetchLike = (url: string, init: RequestInit) => Promise<Response>;

export class SynthesisQueue {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private nextSeq = 0;
  private lastApplied = -1;
  private inFlight = 0;

  constructor(
    private readonly callbacks: QueueCallbacks,
    private readonly base = "",
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
    private readonly debounceMs = DEBOUNCE_MS,
  ) {}

  /** Queue a request for `params`, replacing any not-yet-sent one. */
  schedule(params: SynthesisParams): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.send(params);
    }, this.debounceMs);
  }

  /** Send immediately, bypassing the debounce (e.g. toggle clicks). */
  sendNow(params: SynthesisParams): Promise<void> {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    return this.send(params);
  }

  get lastAppliedSeq(): number {
    return this.lastApplied;
  }

  private setBusy(delta: number): void {
    this.inFlight += delta;
    this.callbacks.onBusy?.(this.inFlight > 0);
  }

  private async send(params: SynthesisParams): Promise<void> {
    const seq = this.nextSeq++;
    this.setBusy(+1);
    try {
      const res = await this.fetchImpl(`${this.base}/api/synthesize`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(params),
      });
      if (seq <= this.lastApplied) return; // superseded while in flight
      if (!res.ok) {
        let body: unknown = null;
        try {
          body = await res.json();
        } catch {
          body = null;
        }
        this.callbacks.onError(describeError(res.status, body));
        return;
      }
      const mesh = (await res.json()) as MeshPayload;
      if (seq <= this.lastApplied) return; // a newer response landed first
      this.lastApplied = seq;
      this.callbacks.onMesh(mesh, seq);
    } catch (err) {
      if (seq > this.lastApplied) {
        this.callbacks.onError(err instanceof Error ? err.message : String(err));
      }
    } finally {
      this.setBusy(-1);
    }
  }
}
