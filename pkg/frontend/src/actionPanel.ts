// Feedback-and-next-step panel for the selected hypothesis: optional
// critique plus the choice between more exploration and refinement.

import type { ActPayload, NodeRecord } from "./types";

export interface ActionHooks {
  onAct(payload: ActPayload): void;
}

export function renderActionPanel(container: HTMLElement,
                                  selected: NodeRecord | null,
                                  busy: boolean, notice: string | null,
                                  hooks: ActionHooks): void {
  container.textContent = "";
  if (selected === null) {
    const hint = document.createElement("p");
    hint.className = "panel-hint";
    hint.textContent = "Select a hypothesis in the tree to steer the search.";
    container.appendChild(hint);
    return;
  }

  const detail = document.createElement("div");
  detail.className = "node-detail";
  const title = document.createElement("h3");
  title.textContent = `${selected.id} · ${selected.stage} · step ${selected.step_index}`;
  const text = document.createElement("p");
  text.className = "node-text";
  text.textContent = selected.text;
  detail.append(title, text);
  container.appendChild(detail);

  const feedback = document.createElement("textarea");
  feedback.className = "feedback-input";
  feedback.placeholder = "Optional feedback to steer the next generation";
  feedback.disabled = busy;
  container.appendChild(feedback);

  const actions = document.createElement("div");
  actions.className = "action-buttons";
  const explore = document.createElement("button");
  explore.textContent = "Continue exploring";
  explore.dataset.action = "explore";
  const refine = document.createElement("button");
  refine.textContent = "Refine";
  refine.dataset.action = "refine";
  for (const [button, next] of [[explore, "explore"], [refine, "refine"]] as const) {
    button.disabled = busy;
    button.addEventListener("click", () => {
      if (button.disabled) return;
      const payload: ActPayload = { node: selected.id, next };
      const critique = feedback.value.trim();
      if (critique) payload.feedback = critique;
      hooks.onAct(payload);
    });
    actions.appendChild(button);
  }
  container.appendChild(actions);

  if (busy || notice) {
    const status = document.createElement("p");
    status.className = "panel-status";
    status.textContent = notice ?? "A run is in flight…";
    container.appendChild(status);
  }
}
