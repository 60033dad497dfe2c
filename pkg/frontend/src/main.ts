/** Browser entry: wires the store, service client, and DOM together. */

import {
  assistantSend,
  deleteSelected,
  exportMmdBytes,
  exportSvgMarkup,
  inlineRename,
  paletteDrop,
  uploadImage,
} from './actions';
import { ServiceClient } from './api';
import { PALETTE, type NodeShapeName } from './commands';
import { liveEditorUrl } from './liveEditor';
import { applyZoom, nodeIdFromEvent, renderInto } from './render';
import { Store, zoomIn, zoomOut } from './state';

const client = new ServiceClient('');
const store = new Store();

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

const codePane = el<HTMLTextAreaElement>('code-pane');
const diagramHost = el<HTMLDivElement>('diagram');
const banner = el<HTMLDivElement>('banner');
const transcriptList = el<HTMLUListElement>('transcript');
const statusLine = el<HTMLSpanElement>('status');

let renderedSvg: SVGSVGElement | null = null;
let lastRenderedCode = '';

async function redraw(): Promise<void> {
  const { code, zoom, renderError } = store.get();
  if (code && code !== lastRenderedCode) {
    const result = await renderInto(diagramHost, code, zoom);
    renderedSvg = result.svg;
    lastRenderedCode = code;
    store.update({ renderError: result.error });
    return;
  }
  if (renderedSvg) applyZoom(diagramHost, renderedSvg, zoom);
  banner.textContent = renderError ?? '';
  banner.hidden = !renderError;
}

store.subscribe((state) => {
  codePane.value = state.code;
  statusLine.textContent = state.documentId
    ? `document ${state.documentId} · revision ${state.revision}`
    : 'no document';
  transcriptList.innerHTML = '';
  for (const entry of state.transcript) {
    const item = document.createElement('li');
    item.className = entry.status;
    item.textContent =
      entry.status === 'applied'
        ? `✓ ${entry.instruction}`
        : `⚠ ${entry.instruction} — ${entry.detail ?? entry.status}`;
    transcriptList.appendChild(item);
  }
  void redraw();
});

function report(err: unknown): void {
  banner.hidden = false;
  banner.textContent = String(err instanceof Error ? err.message : err);
}

// --- upload -----------------------------------------------------------

el<HTMLInputElement>('file-input').addEventListener('change', async (event) => {
  const input = event.target as HTMLInputElement;
  const file = input.files?.[0];
  if (!file) return;
  const model = el<HTMLSelectElement>('model-select').value;
  try {
    await uploadImage(client, store, file, file.name, model);
  } catch (err) {
    report(err);
  } finally {
    input.value = '';
  }
});

// --- palette (drag and drop onto the canvas or a node) ----------------

const paletteBox = el<HTMLDivElement>('palette');
for (const { shape, title } of PALETTE) {
  const chip = document.createElement('div');
  chip.className = `chip chip-${shape}`;
  chip.textContent = title;
  chip.draggable = true;
  chip.addEventListener('dragstart', (event) => {
    event.dataTransfer?.setData('text/x-f2m-shape', shape);
  });
  paletteBox.appendChild(chip);
}

diagramHost.addEventListener('dragover', (event) => event.preventDefault());
diagramHost.addEventListener('drop', async (event) => {
  event.preventDefault();
  const shape = event.dataTransfer?.getData('text/x-f2m-shape') as NodeShapeName | '';
  if (!shape || !store.get().documentId) return;
  const target = nodeIdFromEvent(event.target);
  try {
    await paletteDrop(client, store, shape, target ?? undefined);
  } catch (err) {
    report(err);
  }
});

// --- inline label editing ---------------------------------------------

diagramHost.addEventListener('click', (event) => {
  const nodeId = nodeIdFromEvent(event.target);
  store.update({ selectedNodeId: nodeId });
  if (!nodeId) return;
  const current = store.get();
  const label = window.prompt(`New label for ${nodeId}:`);
  if (label === null || !current.documentId) return;
  inlineRename(client, store, nodeId, label).catch(report);
});

el<HTMLButtonElement>('delete-node').addEventListener('click', () => {
  deleteSelected(client, store).catch(report);
});

// --- assistant ---------------------------------------------------------

el<HTMLFormElement>('assistant-form').addEventListener('submit', (event) => {
  event.preventDefault();
  const box = el<HTMLInputElement>('assistant-input');
  const model = el<HTMLSelectElement>('model-select').value;
  const instruction = box.value;
  box.value = '';
  assistantSend(client, store, instruction, model).catch(report);
});

// --- zoom / export / handoff -------------------------------------------

el<HTMLButtonElement>('zoom-in').addEventListener('click', () => {
  store.update({ zoom: zoomIn(store.get().zoom) });
});
el<HTMLButtonElement>('zoom-out').addEventListener('click', () => {
  store.update({ zoom: zoomOut(store.get().zoom) });
});

function download(name: string, type: string, payload: string): void {
  const url = URL.createObjectURL(new Blob([payload], { type }));
  const link = document.createElement('a');
  link.href = url;
  link.download = name;
  link.click();
  URL.revokeObjectURL(url);
}

el<HTMLButtonElement>('export-mmd').addEventListener('click', () => {
  try {
    download('diagram.mmd', 'text/plain;charset=utf-8', exportMmdBytes(store));
  } catch (err) {
    report(err);
  }
});

el<HTMLButtonElement>('export-svg').addEventListener('click', () => {
  try {
    download('diagram.svg', 'image/svg+xml', exportSvgMarkup(renderedSvg));
  } catch (err) {
    report(err);
  }
});

el<HTMLButtonElement>('live-editor').addEventListener('click', () => {
  const { code } = store.get();
  if (code) window.open(liveEditorUrl(code), '_blank');
});

// --- model list ---------------------------------------------------------

void (async () => {
  try {
    const models = await client.models();
    const select = el<HTMLSelectElement>('model-select');
    select.innerHTML = '';
    for (const model of models) {
      const option = document.createElement('option');
      option.value = model.id;
      option.textContent = model.configured ? model.id : `${model.id} (no key)`;
      option.disabled = !model.configured;
      select.appendChild(option);
    }
  } catch {
    /* service offline: keep the static default */
  }
})();
