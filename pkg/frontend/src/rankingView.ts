// Ranked hypotheses with their averaged self-evaluation scores. Row click
// selects the node in the tree.

import type { RankingResponse } from "./types";

export interface RankingHooks {
  onSelect(nodeId: string): void;
  onRetry(): void;
}

export function renderRanking(container: HTMLElement,
                              ranking: RankingResponse | null,
                              error: string | null,
                              hooks: RankingHooks): void {
  container.textContent = "";
  if (error !== null) {
    const box = document.createElement("div");
    box.className = "ranking-error";
    box.textContent = `Ranking unavailable: ${error}`;
    const retry = document.createElement("button");
    retry.textContent = "Retry";
    retry.addEventListener("click", () => hooks.onRetry());
    box.appendChild(retry);
    container.appendChild(box);
    return;
  }
  if (ranking === null || ranking.ranking.length === 0) {
    const empty = document.createElement("p");
    empty.className = "ranking-empty";
    empty.textContent = "No ranked hypotheses yet.";
    container.appendChild(empty);
    return;
  }
  const table = document.createElement("table");
  table.className = "ranking-table";
  const head = table.createTHead().insertRow();
  for (const title of ["#", "Node", "Average", "Criteria"]) {
    const cell = document.createElement("th");
    cell.textContent = title;
    head.appendChild(cell);
  }
  const body = table.createTBody();
  ranking.ranking.forEach((row, index) => {
    const tr = body.insertRow();
    tr.dataset.nodeId = row.node;
    tr.insertCell().textContent = String(index + 1);
    tr.insertCell().textContent = row.node;
    tr.insertCell().textContent =
      row.scores === null ? "—" : row.scores.average.toFixed(2);
    tr.insertCell().textContent =
      row.scores === null
        ? "unavailable"
        : Object.entries(row.scores.criteria)
            .map(([name, value]) => `${name} ${value}`)
            .join(", ");
    tr.addEventListener("click", () => hooks.onSelect(row.node));
  });
  container.appendChild(table);
}
