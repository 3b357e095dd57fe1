/** Typed client for the inversion service. All geometry work happens on the
 * server; this module only moves payloads. */

export type CloudPayload = {
  n: number;
  points: number[][];
  colors?: number[][];
  labels?: number[];
};

export type EditResponse = CloudPayload & { stack_depth: number };

export type SessionStatus = {
  state: "idle" | "pending" | "running" | "done" | "error";
  mode?: string | null;
  iteration?: number | null;
  cd?: number | null;
  final_cd?: number;
  error?: string;
};

export type InvertOptions = {
  mode?: string;
  step3_iterations?: number;
  step1_iterations?: number;
  seed?: number;
};

export type EditRecord = {
  mode: "additive_noise" | "interpolate_toward" | "affine_transform";
  indices: number[];
  sigma?: number;
  weight?: number;
  donor?: number[][];
  linear?: number[][];
  translation?: number[];
  seed?: number;
};

export type ModelInfo = {
  n_points: number;
  noise_dim: number;
  modes: string[];
  stacks: string[];
};

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
  }
}

async function failWith(response: Response): Promise<never> {
  let detail = `${response.status} ${response.statusText}`;
  try {
    const body = await response.json();
    if (body && typeof body.detail === "string") detail = body.detail;
  } catch {
    /* non-JSON error body */
  }
  throw new ApiError(response.status, detail);
}

export class ApiClient {
  constructor(readonly base: string = "") {}

  private url(path: string): string {
    return this.base.replace(/\/$/, "") + path;
  }

  async createSession(payload: BodyInit): Promise<string> {
    const response = await fetch(this.url("/sessions"), {
      method: "POST",
      body: payload,
    });
    if (!response.ok) await failWith(response);
    const body = await response.json();
    return body.session_id as string;
  }

  async startInversion(sessionId: string, options: InvertOptions = {}): Promise<void> {
    const response = await fetch(this.url(`/sessions/${sessionId}/invert`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(options),
    });
    if (!response.ok) await failWith(response);
  }

  async getStatus(sessionId: string): Promise<SessionStatus> {
    const response = await fetch(this.url(`/sessions/${sessionId}/status`));
    if (!response.ok) await failWith(response);
    return (await response.json()) as SessionStatus;
  }

  /** Poll until the inversion reaches a terminal state. */
  async pollUntilDone(
    sessionId: string,
    options?: {
      intervalMs?: number;
      timeoutMs?: number;
      onProgress?: (status: SessionStatus) => void;
    },
  ): Promise<SessionStatus> {
    const intervalMs = options?.intervalMs ?? 500;
    const timeoutMs = options?.timeoutMs ?? 600_000;
    const startedAt = Date.now();
    for (;;) {
      const status = await this.getStatus(sessionId);
      options?.onProgress?.(status);
      if (status.state === "done") return status;
      if (status.state === "error") {
        throw new ApiError(500, status.error ?? "inversion failed");
      }
      if (Date.now() - startedAt > timeoutMs) {
        throw new ApiError(408, "timed out waiting for inversion");
      }
      await new Promise((resolve) => setTimeout(resolve, intervalMs));
    }
  }

  async getCloud(
    sessionId: string,
    which: "target" | "recon" | "edited",
  ): Promise<CloudPayload> {
    const response = await fetch(
      this.url(`/sessions/${sessionId}/cloud?which=${which}&format=json`),
    );
    if (!response.ok) await failWith(response);
    return (await response.json()) as CloudPayload;
  }

  /** Native-format bytes; byte-identical for identical session histories. */
  async getCloudBytes(
    sessionId: string,
    which: "target" | "recon" | "edited",
  ): Promise<ArrayBuffer> {
    const response = await fetch(
      this.url(`/sessions/${sessionId}/cloud?which=${which}&format=pinv`),
    );
    if (!response.ok) await failWith(response);
    return await response.arrayBuffer();
  }

  async pushEdit(sessionId: string, record: EditRecord): Promise<EditResponse> {
    const response = await fetch(this.url(`/sessions/${sessionId}/edits`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(record),
    });
    if (!response.ok) await failWith(response);
    return (await response.json()) as EditResponse;
  }

  async undoEdit(sessionId: string): Promise<EditResponse> {
    const response = await fetch(this.url(`/sessions/${sessionId}/edits/last`), {
      method: "DELETE",
    });
    if (!response.ok) await failWith(response);
    return (await response.json()) as EditResponse;
  }

  async modelInfo(): Promise<ModelInfo> {
    const response = await fetch(this.url("/model"));
    if (!response.ok) await failWith(response);
    return (await response.json()) as ModelInfo;
  }
}
