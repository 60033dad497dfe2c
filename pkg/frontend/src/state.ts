/** UI state container.
 *
 * The code text is only ever set from a service response, so the code
 * pane and the rendered diagram can never diverge from the server's
 * document.  Subscribers re-render on every change.
 */

export interface TranscriptEntry {
  instruction: string;
  status: 'applied' | 'fallback' | 'error';
  detail?: string;
}

export interface UiState {
  documentId: string | null;
  code: string;
  revision: number;
  selectedNodeId: string | null;
  zoom: number;
  transcript: TranscriptEntry[];
  renderError: string | null;
  busy: boolean;
}

export const ZOOM_MIN = 0.25;
export const ZOOM_MAX = 4;
export const ZOOM_STEP = 1.25;

export function initialState(): UiState {
  return {
    documentId: null,
    code: '',
    revision: 0,
    selectedNodeId: null,
    zoom: 1,
    transcript: [],
    renderError: null,
    busy: false,
  };
}

export type Listener = (state: UiState) => void;

export class Store {
  private state: UiState = initialState();
  private listeners: Listener[] = [];

  get(): UiState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  update(patch: Partial<UiState>): UiState {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) listener(this.state);
    return this.state;
  }

  /** Adopt a service mutation response; the server is the sync authority. */
  adoptDocument(documentId: string, code: string, revision: number): UiState {
    return this.update({ documentId, code, revision, renderError: null });
  }

  pushTranscript(entry: TranscriptEntry): UiState {
    return this.update({ transcript: [...this.state.transcript, entry] });
  }
}

export function zoomIn(zoom: number): number {
  return Math.min(ZOOM_MAX, zoom * ZOOM_STEP);
}

export function zoomOut(zoom: number): number {
  return Math.max(ZOOM_MIN, zoom / ZOOM_STEP);
}

/** Scale that fits a rendered diagram into its viewport, never above 1. */
export function fitScale(
  viewport: { width: number; height: number },
  diagram: { width: number; height: number },
): number {
  if (diagram.width <= 0 || diagram.height <= 0) return 1;
  return Math.min(1, viewport.width / diagram.width, viewport.height / diagram.height);
}
