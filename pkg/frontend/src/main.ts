// Application shell: hash routing between the input form and the session
// workspace. Tree mutations arrive exclusively through server progress
// events; the client never applies a change the server has not announced.

import { ApiClient, ApiError } from "./api";
import { renderActionPanel } from "./actionPanel";
import { subscribeEvents, type EventSourceFactory, type Subscription } from "./events";
import { renderInputForm } from "./inputForm";
import { renderRanking } from "./rankingView";
import { initialViewState, nodeById, upsertNode, type ViewState } from "./state";
import { renderTree } from "./treeView";
import type {
  ActPayload,
  NodeRecord,
  ProgressEvent,
  RankingResponse,
  TreeDocument,
} from "./types";

export interface WorkspaceElements {
  tree: HTMLElement;
  ranking: HTMLElement;
  panel: HTMLElement;
  status: HTMLElement;
}

export class Workspace {
  doc: TreeDocument | null = null;
  ranking: RankingResponse | null = null;
  rankingError: string | null = null;
  view: ViewState = initialViewState();
  private subscription: Subscription | null = null;

  constructor(
    private readonly api: ApiClient,
    readonly sessionId: string,
    private readonly els: WorkspaceElements,
    private readonly makeSource: EventSourceFactory,
  ) {}

  async start(): Promise<void> {
    this.doc = await this.api.fetchTree(this.sessionId);
    if (this.view.selected === null) this.view.selected = this.doc.active;
    this.subscription = subscribeEvents(
      (after) => this.api.eventsUrl(this.sessionId, after),
      (event) => this.handleEvent(event),
      this.makeSource,
    );
    this.render();
  }

  stop(): void {
    this.subscription?.close();
  }

  handleEvent(event: ProgressEvent): void {
    if (event.kind === "GenerationStarted") {
      this.view.busy = true;
      this.view.notice = null;
    } else if (event.kind === "NodeAdded" && this.doc !== null) {
      this.doc = upsertNode(this.doc, event.payload.node as NodeRecord);
    } else if (event.kind === "RunCompleted") {
      this.view.busy = false;
      this.view.notice = null;
      void this.refreshRanking();
    } else if (event.kind === "Error") {
      this.view.busy = false;
      this.view.notice = `Run failed: ${String(event.payload.message ?? "unknown")}`;
    }
    this.render();
  }

  async act(payload: ActPayload): Promise<void> {
    try {
      await this.api.act(this.sessionId, payload);
      this.view.busy = true;
      this.view.notice = null;
    } catch (raised) {
      if (raised instanceof ApiError && raised.status === 409) {
        this.view.busy = true;
        this.view.notice = "A run is already in flight; wait for it to finish.";
      } else if (raised instanceof ApiError) {
        this.view.notice = raised.detail;
      } else {
        this.view.notice = String(raised);
      }
    }
    this.render();
  }

  async refreshRanking(): Promise<void> {
    try {
      this.ranking = await this.api.fetchRanking(this.sessionId, "leaves");
      this.rankingError = null;
    } catch (raised) {
      this.rankingError =
        raised instanceof ApiError ? raised.detail : String(raised);
    }
    this.render();
  }

  select(nodeId: string): void {
    this.view.selected = nodeId;
    this.render();
  }

  toggleCollapse(nodeId: string): void {
    if (this.view.collapsed.has(nodeId)) this.view.collapsed.delete(nodeId);
    else this.view.collapsed.add(nodeId);
    this.render();
  }

  render(): void {
    if (this.doc === null) return;
    renderTree(this.els.tree, this.doc, this.view.collapsed, this.view.selected, {
      onSelect: (id) => this.select(id),
      onToggleCollapse: (id) => this.toggleCollapse(id),
    });
    renderRanking(this.els.ranking, this.ranking, this.rankingError, {
      onSelect: (id) => this.select(id),
      onRetry: () => void this.refreshRanking(),
    });
    const selectedNode =
      this.view.selected !== null && this.doc !== null
        ? nodeById(this.doc, this.view.selected) ?? null
        : null;
    renderActionPanel(this.els.panel, selectedNode, this.view.busy,
                      this.view.notice, {
      onAct: (payload) => void this.act(payload),
    });
    this.els.status.textContent = this.view.busy ? "run in flight" : "idle";
  }
}

function mountWorkspace(root: HTMLElement, api: ApiClient, sessionId: string,
                        makeSource: EventSourceFactory): Workspace {
  root.textContent = "";
  const header = document.createElement("header");
  const title = document.createElement("h2");
  title.textContent = `Session ${sessionId}`;
  const status = document.createElement("span");
  status.className = "run-status";
  header.append(title, status);

  const grid = document.createElement("div");
  grid.className = "workspace";
  const tree = document.createElement("section");
  tree.className = "pane tree-pane";
  const ranking = document.createElement("section");
  ranking.className = "pane ranking-pane";
  const panel = document.createElement("section");
  panel.className = "pane action-pane";
  grid.append(tree, ranking, panel);
  root.append(header, grid);

  const workspace = new Workspace(api, sessionId, { tree, ranking, panel, status },
                                  makeSource);
  void workspace.start();
  return workspace;
}

export function startApp(root: HTMLElement, api: ApiClient,
                         makeSource: EventSourceFactory): void {
  let workspace: Workspace | null = null;
  const routeTo = () => {
    workspace?.stop();
    workspace = null;
    const match = window.location.hash.match(/^#\/session\/(.+)$/);
    if (match && match[1]) {
      workspace = mountWorkspace(root, api, match[1], makeSource);
    } else {
      renderInputForm(root, api, {
        onCreated: (summary) => {
          window.location.hash = `#/session/${summary.session_id}`;
        },
      });
    }
  };
  window.addEventListener("hashchange", routeTo);
  routeTo();
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  startApp(
    document.getElementById("app")!,
    new ApiClient(),
    (url) => new EventSource(url),
  );
}
