import { ApiClient, ServiceError } from './api.js';
import { coverage, overlayPixels, thresholdMask, type SoftMask } from './overlay.js';
import { EditSession, validateUpload } from './session.js';

const WIDTH = 256;
const HEIGHT = 64;

const api = new ApiClient('..');
const session = new EditSession();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const fileInput = el<HTMLInputElement>('file-input');
const textInput = el<HTMLInputElement>('text-input');
const estimateBtn = el<HTMLButtonElement>('estimate-btn');
const editBtn = el<HTMLButtonElement>('edit-btn');
const thresholdSlider = el<HTMLInputElement>('threshold-slider');
const thresholdValue = el<HTMLSpanElement>('threshold-value');
const overlayToggle = el<HTMLInputElement>('overlay-toggle');
const wipeSlider = el<HTMLInputElement>('wipe-slider');
const errorBanner = el<HTMLDivElement>('error-banner');
const statusLine = el<HTMLSpanElement>('status-line');
const historyList = el<HTMLUListElement>('history-list');
const previewCanvas = el<HTMLCanvasElement>('preview-canvas');
const compareCanvas = el<HTMLCanvasElement>('compare-canvas');

let beforeImage: HTMLImageElement | null = null;
let afterImage: HTMLImageElement | null = null;

function showError(message: string): void {
  errorBanner.textContent = message;
  errorBanner.hidden = false;
}

function clearError(): void {
  errorBanner.hidden = true;
}

function reportFailure(err: unknown): void {
  if (err instanceof DOMException && err.name === 'AbortError') return; // replaced
  showError(err instanceof ServiceError ? err.message : String(err));
}

function loadImage(b64Png: string): Promise<HTMLImageElement> {
  return new Promise((resolve, reject) => {
    const img = new Image();
    img.onload = () => resolve(img);
    img.onerror = () => reject(new Error('could not decode image'));
    img.src = `data:image/png;base64,${b64Png}`;
  });
}

function fileToBase64(file: File): Promise<string> {
  return new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onload = () => {
      const url = reader.result as string;
      resolve(url.slice(url.indexOf(',') + 1));
    };
    reader.onerror = () => reject(new Error('could not read file'));
    reader.readAsDataURL(file);
  });
}

/** Re-encode any accepted upload as a 64x256-normalized PNG preview. */
async function normalizeToPng(file: File): Promise<string> {
  const raw = await fileToBase64(file);
  const img = await loadImage(raw);
  const canvas = document.createElement('canvas');
  canvas.width = WIDTH;
  canvas.height = HEIGHT;
  const ctx = canvas.getContext('2d')!;
  ctx.drawImage(img, 0, 0, WIDTH, HEIGHT);
  const url = canvas.toDataURL('image/png');
  return url.slice(url.indexOf(',') + 1);
}

function drawPreview(): void {
  const ctx = previewCanvas.getContext('2d')!;
  ctx.clearRect(0, 0, WIDTH, HEIGHT);
  if (beforeImage) ctx.drawImage(beforeImage, 0, 0, WIDTH, HEIGHT);
  if (session.softMask && session.overlayVisible) {
    const binary = thresholdMask(session.softMask, session.maskThreshold);
    const tile = new ImageData(overlayPixels(binary), WIDTH, HEIGHT);
    const scratch = document.createElement('canvas');
    scratch.width = WIDTH;
    scratch.height = HEIGHT;
    scratch.getContext('2d')!.putImageData(tile, 0, 0);
    ctx.drawImage(scratch, 0, 0);
    statusLine.textContent = `mask coverage ${(coverage(binary) * 100).toFixed(1)}%`;
  }
}

function drawComparison(): void {
  const ctx = compareCanvas.getContext('2d')!;
  ctx.clearRect(0, 0, compareCanvas.width, compareCanvas.height);
  if (!afterImage) return;
  const w = compareCanvas.width;
  const h = compareCanvas.height;
  const split = Math.round((Number(wipeSlider.value) / 100) * w);
  if (beforeImage) ctx.drawImage(beforeImage, 0, 0, w, h);
  ctx.save();
  ctx.beginPath();
  ctx.rect(split, 0, w - split, h);
  ctx.clip();
  ctx.drawImage(afterImage, 0, 0, w, h);
  ctx.restore();
  ctx.fillStyle = '#fff';
  ctx.fillRect(split - 1, 0, 2, h);
}

async function decodeSoftMask(b64Png: string): Promise<SoftMask> {
  const img = await loadImage(b64Png);
  const canvas = document.createElement('canvas');
  canvas.width = WIDTH;
  canvas.height = HEIGHT;
  const ctx = canvas.getContext('2d')!;
  ctx.drawImage(img, 0, 0, WIDTH, HEIGHT);
  const rgba = ctx.getImageData(0, 0, WIDTH, HEIGHT).data;
  const data = new Uint8Array(WIDTH * HEIGHT);
  for (let i = 0; i < data.length; i++) data[i] = rgba[i * 4];
  return { data, width: WIDTH, height: HEIGHT };
}

function renderHistory(): void {
  historyList.replaceChildren(
    ...session.history.map((entry, i) => {
      const item = document.createElement('li');
      item.textContent =
        `#${i + 1} "${entry.request.target_text}" — ${entry.response.timing_ms} ms`;
      return item;
    }),
  );
}

fileInput.addEventListener('change', async () => {
  clearError();
  const file = fileInput.files?.[0];
  if (!file) return;
  const problem = validateUpload({ name: file.name, type: file.type, size: file.size });
  if (problem) {
    showError(problem);
    return;
  }
  try {
    session.setSourceImage(await normalizeToPng(file));
    beforeImage = await loadImage(session.sourceImageB64!);
    afterImage = null;
    statusLine.textContent = `loaded ${file.name}`;
    drawPreview();
    drawComparison();
  } catch (err) {
    reportFailure(err);
  }
});

estimateBtn.addEventListener('click', async () => {
  clearError();
  if (!session.sourceImageB64) {
    showError('Upload an image first.');
    return;
  }
  try {
    const res = await api.mask(session.sourceImageB64);
    session.softMask = await decodeSoftMask(res.soft_mask_b64_png);
    drawPreview();
  } catch (err) {
    reportFailure(err);
  }
});

thresholdSlider.addEventListener('input', () => {
  session.maskThreshold = Number(thresholdSlider.value) / 100;
  thresholdValue.textContent = session.maskThreshold.toFixed(2);
  drawPreview();
});

overlayToggle.addEventListener('change', () => {
  session.overlayVisible = overlayToggle.checked;
  drawPreview();
});

editBtn.addEventListener('click', async () => {
  clearError();
  session.targetText = textInput.value.trim();
  let payload;
  try {
    payload = session.buildEditPayload();
  } catch (err) {
    showError(String(err instanceof Error ? err.message : err));
    return;
  }
  statusLine.textContent = 'editing…';
  try {
    const response = await api.edit(payload);
    session.recordEdit(payload, response);
    afterImage = await loadImage(response.edited_b64_png);
    statusLine.textContent = `done in ${response.timing_ms} ms`;
    renderHistory();
    drawComparison();
  } catch (err) {
    statusLine.textContent = '';
    reportFailure(err);
  }
});

wipeSlider.addEventListener('input', drawComparison);

api
  .health()
  .then((h) => {
    statusLine.textContent = `service ok (checkpoint ${h.checkpoint ?? '?'})`;
  })
  .catch(reportFailure);
