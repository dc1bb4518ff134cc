// Pure view-model helpers. The rendered UI is a function of the last
// fetched tree document plus this local state, so a refresh always
// reproduces the same view for the same server state.

import type { NodeRecord, TreeDocument } from "./types";

export interface ViewState {
  selected: string | null;
  collapsed: Set<string>;
  busy: boolean;
  notice: string | null;
}

export function initialViewState(): ViewState {
  return { selected: null, collapsed: new Set(), busy: false, notice: null };
}

export function nodeById(doc: TreeDocument, id: string): NodeRecord | undefined {
  return doc.nodes.find((node) => node.id === id);
}

export function rootPath(doc: TreeDocument, id: string): string[] {
  const path: string[] = [];
  let current = nodeById(doc, id);
  while (current) {
    path.unshift(current.id);
    current = current.parent === null ? undefined : nodeById(doc, current.parent);
  }
  return path;
}

/** Merge a freshly announced node into the document without refetching. */
export function upsertNode(doc: TreeDocument, record: NodeRecord): TreeDocument {
  const nodes = doc.nodes.filter((node) => node.id !== record.id).concat(record);
  nodes.sort((a, b) => (a.id < b.id ? -1 : a.id > b.id ? 1 : 0));
  return { ...doc, nodes };
}

/**
 * Nodes to draw. A node is hidden when any ancestor is collapsed, except
 * that the selected node's root path is always visible.
 */
export function visibleNodes(doc: TreeDocument, collapsed: Set<string>,
                             selected: string | null): NodeRecord[] {
  const protectedPath = new Set(selected ? rootPath(doc, selected) : []);
  const byId = new Map(doc.nodes.map((node) => [node.id, node]));
  const hidden = (node: NodeRecord): boolean => {
    if (protectedPath.has(node.id)) return false;
    let parent = node.parent;
    while (parent !== null) {
      if (collapsed.has(parent)) return true;
      parent = byId.get(parent)?.parent ?? null;
    }
    return false;
  };
  return doc.nodes.filter((node) => !hidden(node));
}
