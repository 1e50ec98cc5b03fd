export interface EditPayload {
  image_b64_png: string;
  target_text: string;
  mask_b64_png?: string;
}

export interface EditResponse {
  edited_b64_png: string;
  estimated_mask_b64_png: string;
  timing_ms: number;
}

export interface MaskResponse {
  soft_mask_b64_png: string;
}

export interface HealthResponse {
  status: string;
  checkpoint?: string;
  version?: string;
}

/** A service error carrying the HTTP status and a user-facing message. */
export class ServiceError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = 'ServiceError';
  }
}

function userMessage(status: number, detail: string | undefined): string {
  switch (status) {
    case 422:
      return 'Text unrenderable: it does not fit the 64×256 crop in the fixed font.';
    case 503:
      return 'Model weights are still loading; try again shortly.';
    case 400:
      return detail || 'The request was rejected as invalid.';
    default:
      return detail || `The service returned HTTP ${status}.`;
  }
}

async function request<T>(base: string, path: string, init: RequestInit): Promise<T> {
  const res = await fetch(`${base}${path}`, init);
  if (!res.ok) {
    const body = await res.json().catch(() => ({} as { detail?: string }));
    throw new ServiceError(res.status, userMessage(res.status, body.detail));
  }
  return res.json() as Promise<T>;
}

/**
 * Client for the editing service.  At most one edit request is in flight:
 * submitting a new one aborts the previous (cancel-and-replace).
 */
export class ApiClient {
  private inflight: AbortController | null = null;

  constructor(private readonly base: string = '') {}

  /** POST /edit, cancelling any edit still in flight. */
  async edit(payload: EditPayload): Promise<EditResponse> {
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    try {
      return await request<EditResponse>(this.base, '/edit', {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify(payload),
        signal: controller.signal,
      });
    } finally {
      if (this.inflight === controller) this.inflight = null;
    }
  }

  /** POST /mask: soft source-mask estimate for an uploaded crop. */
  mask(imageB64Png: string): Promise<MaskResponse> {
    return request<MaskResponse>(this.base, '/mask', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ image_b64_png: imageB64Png }),
    });
  }

  health(): Promise<HealthResponse> {
    return request<HealthResponse>(this.base, '/healthz', { method: 'GET' });
  }
}
