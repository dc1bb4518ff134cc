// Interactive SVG tree: stage-colored nodes, distinct styling for edges
// that cross stages, selected root path highlighted.

import { CELL_HEIGHT, CELL_WIDTH, layoutTree } from "./layout";
import { rootPath, visibleNodes } from "./state";
import type { NodeRecord, TreeDocument } from "./types";

const SVG_NS = "http://www.w3.org/2000/svg";

export interface TreeViewHooks {
  onSelect(nodeId: string): void;
  onToggleCollapse(nodeId: string): void;
}

function shortLabel(node: NodeRecord): string {
  const text = node.text.replace(/\s+/g, " ").trim();
  return text.length > 42 ? `${text.slice(0, 39)}…` : text;
}

export function renderTree(container: HTMLElement, doc: TreeDocument,
                           collapsed: Set<string>, selected: string | null,
                           hooks: TreeViewHooks): void {
  container.textContent = "";
  const shown = visibleNodes(doc, collapsed, selected);
  const placed = layoutTree(shown);
  const byId = new Map(placed.map((p) => [p.node.id, p]));
  const highlight = new Set(selected ? rootPath(doc, selected) : []);

  const width = Math.max(...placed.map((p) => p.x), CELL_WIDTH) + CELL_WIDTH / 2;
  const height = Math.max(...placed.map((p) => p.y), CELL_HEIGHT) + CELL_HEIGHT / 2;
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "tree-svg");
  svg.setAttribute("data-node-count", String(shown.length));

  for (const { node, x, y } of placed) {
    if (node.parent === null) continue;
    const parent = byId.get(node.parent);
    if (!parent) continue;
    const edge = document.createElementNS(SVG_NS, "line");
    edge.setAttribute("x1", String(parent.x));
    edge.setAttribute("y1", String(parent.y + 20));
    edge.setAttribute("x2", String(x));
    edge.setAttribute("y2", String(y - 20));
    const crossing = parent.node.stage !== node.stage;
    edge.setAttribute(
      "class",
      crossing
        ? `edge edge-transition edge-to-${node.stage}`
        : `edge edge-${node.stage}`,
    );
    svg.appendChild(edge);
  }

  for (const { node, x, y } of placed) {
    const group = document.createElementNS(SVG_NS, "g");
    const classes = ["node", `stage-${node.stage}`];
    if (node.id === selected) classes.push("selected");
    else if (highlight.has(node.id)) classes.push("on-path");
    group.setAttribute("class", classes.join(" "));
    group.setAttribute("data-node-id", node.id);
    group.setAttribute("transform", `translate(${x}, ${y})`);

    const box = document.createElementNS(SVG_NS, "rect");
    box.setAttribute("x", String(-CELL_WIDTH / 2 + 8));
    box.setAttribute("y", "-20");
    box.setAttribute("width", String(CELL_WIDTH - 16));
    box.setAttribute("height", "40");
    box.setAttribute("rx", "6");
    group.appendChild(box);

    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("text-anchor", "middle");
    label.setAttribute("dy", "-2");
    label.textContent = shortLabel(node);
    group.appendChild(label);

    const meta = document.createElementNS(SVG_NS, "text");
    meta.setAttribute("text-anchor", "middle");
    meta.setAttribute("dy", "14");
    meta.setAttribute("class", "node-meta");
    const score = node.scores ? ` · ${node.scores.average.toFixed(1)}` : "";
    meta.textContent = `${node.id} · step ${node.step_index}${score}`;
    group.appendChild(meta);

    group.addEventListener("click", () => hooks.onSelect(node.id));
    group.addEventListener("dblclick", () => hooks.onToggleCollapse(node.id));
    svg.appendChild(group);
  }

  container.appendChild(svg);
}
