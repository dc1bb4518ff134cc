// Layered top-down layout: rows by depth from the root, leaves spread
// left-to-right in id order, inner nodes centered over their children.

import type { NodeRecord } from "./types";

export interface PlacedNode {
  node: NodeRecord;
  x: number;
  y: number;
}

export const CELL_WIDTH = 150;
export const CELL_HEIGHT = 92;

export function layoutTree(nodes: NodeRecord[]): PlacedNode[] {
  if (nodes.length === 0) return [];
  const byId = new Map(nodes.map((node) => [node.id, node]));
  const children = new Map<string, NodeRecord[]>();
  const roots: NodeRecord[] = [];
  for (const node of [...nodes].sort((a, b) => (a.id < b.id ? -1 : 1))) {
    if (node.parent !== null && byId.has(node.parent)) {
      const siblings = children.get(node.parent) ?? [];
      siblings.push(node);
      children.set(node.parent, siblings);
    } else {
      roots.push(node);
    }
  }
  const positions = new Map<string, { x: number; depth: number }>();
  let cursor = 0;
  const place = (node: NodeRecord, depth: number): number => {
    const kids = children.get(node.id) ?? [];
    let x: number;
    if (kids.length === 0) {
      x = cursor;
      cursor += 1;
    } else {
      const xs = kids.map((kid) => place(kid, depth + 1));
      x = (Math.min(...xs) + Math.max(...xs)) / 2;
    }
    positions.set(node.id, { x, depth });
    return x;
  };
  for (const root of roots) place(root, 0);
  return nodes.map((node) => {
    const spot = positions.get(node.id)!;
    return {
      node,
      x: spot.x * CELL_WIDTH + CELL_WIDTH / 2,
      y: spot.depth * CELL_HEIGHT + CELL_HEIGHT / 2,
    };
  });
}
