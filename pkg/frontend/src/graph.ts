import type { GraphDocument, GraphEdge, GraphNode } from "./types.js";

/**
 * Layered left-to-right layout for a small acyclic component.
 *
 * Each node's layer is its longest path distance from a source; nodes in a
 * layer are stacked vertically in first-appearance order. Positive edges
 * render solid green with a "+" badge, negative ones dashed red with a
 * minus badge.
 */

const SVG_NS = "http://www.w3.org/2000/svg";

const NODE_WIDTH = 190;
const NODE_HEIGHT = 46;
const H_GAP = 90;
const V_GAP = 26;
const PADDING = 16;

interface Placed {
  node: GraphNode;
  x: number;
  y: number;
}

export function layerOf(doc: GraphDocument): Map<string, number> {
  const incoming = new Map<string, GraphEdge[]>();
  for (const edge of doc.edges) {
    const bucket = incoming.get(edge.target) ?? [];
    bucket.push(edge);
    incoming.set(edge.target, bucket);
  }
  const layers = new Map<string, number>();
  const visiting = new Set<string>();
  const layer = (id: string): number => {
    const known = layers.get(id);
    if (known !== undefined) return known;
    if (visiting.has(id)) return 0; // cycle guard; documents are acyclic
    visiting.add(id);
    const preds = incoming.get(id) ?? [];
    const value = preds.length
      ? Math.max(...preds.map((e) => layer(e.source) + 1))
      : 0;
    visiting.delete(id);
    layers.set(id, value);
    return value;
  };
  for (const node of doc.nodes) layer(node.id);
  return layers;
}

function place(doc: GraphDocument): { placed: Map<string, Placed>; width: number; height: number } {
  const layers = layerOf(doc);
  const byLayer = new Map<number, GraphNode[]>();
  for (const node of doc.nodes) {
    const l = layers.get(node.id) ?? 0;
    const bucket = byLayer.get(l) ?? [];
    bucket.push(node);
    byLayer.set(l, bucket);
  }
  const placed = new Map<string, Placed>();
  const layerCount = Math.max(...byLayer.keys()) + 1;
  const tallest = Math.max(...[...byLayer.values()].map((b) => b.length));
  const height = PADDING * 2 + tallest * NODE_HEIGHT + (tallest - 1) * V_GAP;
  for (const [l, bucket] of byLayer) {
    const columnHeight = bucket.length * NODE_HEIGHT + (bucket.length - 1) * V_GAP;
    const top = (height - columnHeight) / 2;
    bucket.forEach((node, index) => {
      placed.set(node.id, {
        node,
        x: PADDING + l * (NODE_WIDTH + H_GAP),
        y: top + index * (NODE_HEIGHT + V_GAP),
      });
    });
  }
  const width = PADDING * 2 + layerCount * NODE_WIDTH + (layerCount - 1) * H_GAP;
  return { placed, width, height };
}

function element<K extends keyof SVGElementTagNameMap>(
  doc: Document,
  tag: K,
  attrs: Record<string, string>,
): SVGElementTagNameMap[K] {
  const el = doc.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) el.setAttribute(key, value);
  return el;
}

function shortLabel(label: string, limit = 26): string {
  return label.length <= limit ? label : `${label.slice(0, limit - 1)}…`;
}

export function renderGraph(doc: GraphDocument, into: Element): SVGSVGElement {
  const dom = into.ownerDocument;
  const { placed, width, height } = place(doc);
  const svg = element(dom, "svg", {
    viewBox: `0 0 ${width} ${height}`,
    width: String(width),
    height: String(height),
    class: "graph-canvas",
    role: "img",
  });

  const defs = element(dom, "defs", {});
  const marker = element(dom, "marker", {
    id: "arrow-head",
    viewBox: "0 0 10 10",
    refX: "9",
    refY: "5",
    markerWidth: "7",
    markerHeight: "7",
    orient: "auto-start-reverse",
  });
  marker.appendChild(element(dom, "path", { d: "M 0 0 L 10 5 L 0 10 z", fill: "#555" }));
  defs.appendChild(marker);
  svg.appendChild(defs);

  for (const edge of doc.edges) {
    const from = placed.get(edge.source);
    const to = placed.get(edge.target);
    if (!from || !to) continue;
    const x1 = from.x + NODE_WIDTH;
    const y1 = from.y + NODE_HEIGHT / 2;
    const x2 = to.x;
    const y2 = to.y + NODE_HEIGHT / 2;
    const positive = edge.polarity === "POS";
    const group = element(dom, "g", {
      class: `graph-edge ${positive ? "edge-positive" : "edge-negative"}`,
      "data-edge": `${edge.source}->${edge.target}`,
      "data-polarity": edge.polarity,
    });
    const midX = (x1 + x2) / 2;
    const path = element(dom, "path", {
      d: `M ${x1} ${y1} C ${midX} ${y1}, ${midX} ${y2}, ${x2} ${y2}`,
      fill: "none",
      stroke: positive ? "#1a7f37" : "#c0392b",
      "stroke-width": "2",
      "marker-end": "url(#arrow-head)",
      ...(positive ? {} : { "stroke-dasharray": "6 4" }),
    });
    group.appendChild(path);
    const badge = element(dom, "g", { class: "edge-badge" });
    const midY = (y1 + y2) / 2;
    badge.appendChild(
      element(dom, "circle", {
        cx: String(midX),
        cy: String(midY),
        r: "9",
        fill: "#fff",
        stroke: positive ? "#1a7f37" : "#c0392b",
      }),
    );
    const sign = element(dom, "text", {
      x: String(midX),
      y: String(midY + 4),
      "text-anchor": "middle",
      "font-size": "13",
      fill: positive ? "#1a7f37" : "#c0392b",
    });
    sign.textContent = positive ? "+" : "−";
    badge.appendChild(sign);
    group.appendChild(badge);
    svg.appendChild(group);
  }

  for (const { node, x, y } of placed.values()) {
    const group = element(dom, "g", { class: "graph-node", "data-node": node.id });
    group.appendChild(
      element(dom, "rect", {
        x: String(x),
        y: String(y),
        rx: "8",
        width: String(NODE_WIDTH),
        height: String(NODE_HEIGHT),
        fill: "#f3f6fb",
        stroke: "#35507a",
      }),
    );
    const text = element(dom, "text", {
      x: String(x + NODE_WIDTH / 2),
      y: String(y + NODE_HEIGHT / 2 + 4),
      "text-anchor": "middle",
      "font-size": "12",
    });
    text.textContent = shortLabel(node.label);
    const title = element(dom, "title", {});
    title.textContent = node.label;
    group.appendChild(title);
    group.appendChild(text);
    svg.appendChild(group);
  }

  into.replaceChildren(svg);
  return svg;
}
