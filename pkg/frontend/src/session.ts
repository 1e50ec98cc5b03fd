import type { EditPayload, EditResponse } from './api.js';
import type { SoftMask } from './overlay.js';

export interface HistoryEntry {
  request: EditPayload;
  response: EditResponse;
}

export interface UploadCandidate {
  name: string;
  type: string;
  size: number;
}

export const MAX_UPLOAD_BYTES = 10 * 1024 * 1024;

const ACCEPTED_TYPES = new Set(['image/png', 'image/jpeg']);

/** Returns an error message, or null when the file is acceptable. */
export function validateUpload(file: UploadCandidate): string | null {
  if (!ACCEPTED_TYPES.has(file.type)) {
    return `Unsupported file type "${file.type || 'unknown'}": upload a PNG or JPEG.`;
  }
  if (file.size > MAX_UPLOAD_BYTES) {
    return 'File is larger than 10 MB; upload a smaller crop.';
  }
  return null;
}

/**
 * One editing session: the uploaded crop, the adjustable mask overlay, the
 * target text, and an append-only history of (request, response) pairs.
 * The displayed result is always the most recent response.
 */
export class EditSession {
  sourceImageB64: string | null = null;
  targetText = '';
  softMask: SoftMask | null = null;
  maskThreshold = 0.5;
  overlayVisible = true;

  private readonly entries: HistoryEntry[] = [];

  get history(): readonly HistoryEntry[] {
    return this.entries;
  }

  setSourceImage(b64Png: string): void {
    this.sourceImageB64 = b64Png;
    this.softMask = null;
  }

  /** Append one completed edit; history never shrinks or reorders. */
  recordEdit(request: EditPayload, response: EditResponse): void {
    this.entries.push({ request, response });
  }

  /** The image currently on display: the latest response, verbatim. */
  latestResult(): EditResponse | null {
    return this.entries.length ? this.entries[this.entries.length - 1].response : null;
  }

  buildEditPayload(maskB64Png?: string): EditPayload {
    if (!this.sourceImageB64) throw new Error('no image uploaded');
    if (!this.targetText) throw new Error('target text is empty');
    const payload: EditPayload = {
      image_b64_png: this.sourceImageB64,
      target_text: this.targetText,
    };
    if (maskB64Png) payload.mask_b64_png = maskB64Png;
    return payload;
  }
}
