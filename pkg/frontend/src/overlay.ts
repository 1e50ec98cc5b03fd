/** Soft mask handling: a probability field in [0, 1] stored as bytes. */

export interface SoftMask {
  /** Row-major probabilities scaled to 0..255. */
  data: Uint8Array;
  width: number;
  height: number;
}

/**
 * Binarize at a threshold in [0, 1].  Strictly-greater comparison, so a
 * threshold of 1.0 always yields an empty overlay and 0.5 matches the
 * service's own hard mask (soft > 0.5).
 */
export function thresholdMask(mask: SoftMask, threshold: number): Uint8Array {
  const cut = threshold * 255;
  const out = new Uint8Array(mask.data.length);
  for (let i = 0; i < mask.data.length; i++) {
    out[i] = mask.data[i] > cut ? 1 : 0;
  }
  return out;
}

export function coverage(binary: Uint8Array): number {
  let on = 0;
  for (let i = 0; i < binary.length; i++) on += binary[i];
  return binary.length === 0 ? 0 : on / binary.length;
}

/** RGBA pixels for drawing the overlay onto a canvas (red, half opaque). */
export function overlayPixels(binary: Uint8Array): Uint8ClampedArray<ArrayBuffer> {
  const rgba = new Uint8ClampedArray(new ArrayBuffer(binary.length * 4));
  for (let i = 0; i < binary.length; i++) {
    if (binary[i]) {
      rgba[i * 4] = 255;
      rgba[i * 4 + 3] = 128;
    }
  }
  return rgba;
}
