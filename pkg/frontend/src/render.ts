/** Mermaid rendering inside a scrollable, zoomable viewport.
 *
 * Rendering failures surface as a diagnostic banner and never block the
 * rest of the UI.  Node clicks are mapped back to node ids so labels can
 * be edited inline.
 */

import mermaid from 'mermaid';
import { fitScale } from './state';

mermaid.initialize({ startOnLoad: false, securityLevel: 'strict', theme: 'default' });

let renderSeq = 0;

export interface RenderResult {
  svg: SVGSVGElement | null;
  error: string | null;
}

export async function renderInto(host: HTMLElement, code: string, zoom: number): Promise<RenderResult> {
  renderSeq += 1;
  try {
    const { svg } = await mermaid.render(`f2m-diagram-${renderSeq}`, code);
    host.innerHTML = svg;
    const element = host.querySelector('svg');
    if (element) {
      element.style.maxWidth = 'none';
      applyZoom(host, element, zoom);
    }
    return { svg: element, error: null };
  } catch (err) {
    // keep the previous drawing; the banner carries the diagnostic
    return { svg: host.querySelector('svg'), error: String(err) };
  }
}

export function applyZoom(host: HTMLElement, svg: SVGSVGElement, zoom: number): void {
  const viewport = host.getBoundingClientRect();
  const box = svg.viewBox.baseVal;
  const base = fitScale(
    { width: viewport.width || box.width, height: viewport.height || box.height },
    { width: box.width, height: box.height },
  );
  const scale = base * zoom;
  svg.style.transformOrigin = '0 0';
  svg.style.transform = `scale(${scale})`;
}

/** Resolve a click inside the rendered SVG to a flowchart node id. */
export function nodeIdFromEvent(target: EventTarget | null): string | null {
  let el = target as Element | null;
  while (el && el.tagName !== 'svg') {
    const id = el.getAttribute?.('id');
    if (id && el.classList.contains('node')) {
      // mermaid ids look like "flowchart-A-12"
      const match = /^flowchart-(.+)-\d+$/.exec(id);
      if (match) return match[1] ?? null;
    }
    el = el.parentElement;
  }
  return null;
}
