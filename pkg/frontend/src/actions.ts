/** UI actions.
 *
 * Every mutation goes through the service and the response replaces the
 * local document state, so after any completed action the code pane
 * equals the server's current code.  Actions are plain async functions
 * over (client, store) so they run identically in the browser and in
 * scripted tests.
 */

import { ApiError, ServiceClient } from './api';
import type { NodeShapeName } from './commands';
import { Store } from './state';

const SHAPE_DEFAULT_LABELS: Record<NodeShapeName, string> = {
  process: 'New step',
  decision: 'Decision?',
  rounded: 'Terminator',
  io: 'Input / Output',
  database: 'Data store',
  circle: 'Connector',
};

export async function uploadImage(
  client: ServiceClient,
  store: Store,
  image: Blob,
  filename: string,
  model: string,
): Promise<void> {
  store.update({ busy: true });
  try {
    const doc = await client.convert(image, filename, model);
    store.adoptDocument(doc.document_id, doc.code, doc.revision);
  } finally {
    store.update({ busy: false, selectedNodeId: null });
  }
}

/** Inline label edit: clicking a node label and typing a new one. */
export async function inlineRename(
  client: ServiceClient,
  store: Store,
  nodeId: string,
  newLabel: string,
): Promise<void> {
  const { documentId } = store.get();
  if (!documentId) throw new Error('no document loaded');
  const label = newLabel.trim();
  if (!label) throw new Error('label must be non-empty');
  const result = await client.edit(documentId, { op: 'rename_node', id: nodeId, label });
  store.adoptDocument(documentId, result.code, result.revision);
}

/** Palette drop: on empty canvas adds a node, onto a node splices above it. */
export async function paletteDrop(
  client: ServiceClient,
  store: Store,
  shape: NodeShapeName,
  targetNodeId?: string,
  label?: string,
): Promise<void> {
  const { documentId } = store.get();
  if (!documentId) throw new Error('no document loaded');
  const text = (label ?? SHAPE_DEFAULT_LABELS[shape]).trim();
  const result = targetNodeId
    ? await client.edit(documentId, {
        op: 'insert_before',
        target: targetNodeId,
        label: text,
        shape,
      })
    : await client.edit(documentId, { op: 'add_node', label: text, shape });
  store.adoptDocument(documentId, result.code, result.revision);
}

export async function deleteSelected(client: ServiceClient, store: Store): Promise<void> {
  const { documentId, selectedNodeId } = store.get();
  if (!documentId || !selectedNodeId) return;
  const result = await client.edit(documentId, { op: 'delete_node', id: selectedNodeId });
  store.update({ selectedNodeId: null });
  store.adoptDocument(documentId, result.code, result.revision);
}

/** Natural-language instruction to the assistant; fallback keeps state. */
export async function assistantSend(
  client: ServiceClient,
  store: Store,
  instruction: string,
  model: string,
): Promise<void> {
  const { documentId } = store.get();
  if (!documentId) throw new Error('no document loaded');
  const text = instruction.trim();
  if (!text) return;
  try {
    const result = await client.refine(documentId, text, model);
    if (result.warning) {
      store.pushTranscript({ instruction: text, status: 'fallback', detail: result.warning });
    } else {
      store.pushTranscript({ instruction: text, status: 'applied' });
    }
    store.adoptDocument(documentId, result.code, result.revision);
  } catch (err) {
    const detail = err instanceof ApiError ? err.message : String(err);
    store.pushTranscript({ instruction: text, status: 'error', detail });
    throw err;
  }
}

/** The .mmd download is the exact code pane bytes. */
export function exportMmdBytes(store: Store): string {
  return store.get().code;
}

/** Serialize the rendered SVG element for the .svg download. */
export function exportSvgMarkup(svgElement: { outerHTML: string } | null): string {
  if (!svgElement) throw new Error('nothing rendered yet');
  return svgElement.outerHTML;
}
