// Session creation form: research question, optional survey/blueprint,
// inspiration corpus upload, and model credentials. Credentials stay in
// memory and session storage only and are never rendered back.

import { ApiClient, ApiError } from "./api";
import type { SessionSummary } from "./types";

export interface FormHooks {
  onCreated(summary: SessionSummary): void;
}

function field(labelText: string, input: HTMLElement): HTMLElement {
  const wrapper = document.createElement("label");
  wrapper.className = "form-field";
  const caption = document.createElement("span");
  caption.textContent = labelText;
  wrapper.append(caption, input);
  return wrapper;
}

export function renderInputForm(container: HTMLElement, api: ApiClient,
                                hooks: FormHooks): void {
  container.textContent = "";
  const form = document.createElement("form");
  form.className = "input-form";
  form.noValidate = true;

  const question = document.createElement("textarea");
  question.name = "question";
  question.rows = 2;
  const survey = document.createElement("textarea");
  survey.name = "survey";
  survey.rows = 3;
  const blueprint = document.createElement("textarea");
  blueprint.name = "blueprint";
  blueprint.rows = 2;
  const corpus = document.createElement("textarea");
  corpus.name = "corpus";
  corpus.rows = 4;
  corpus.placeholder = '{"id": "p1", "title": "…", "abstract": "…} per line';

  const apiKey = document.createElement("input");
  apiKey.type = "password";
  apiKey.name = "api_key";
  apiKey.autocomplete = "off";
  const baseUrl = document.createElement("input");
  baseUrl.name = "base_url";
  baseUrl.value = sessionStorage.getItem("moose.base_url") ?? "";
  const model = document.createElement("input");
  model.name = "model";
  model.value = sessionStorage.getItem("moose.model") ?? "";

  const error = document.createElement("p");
  error.className = "form-error";
  error.hidden = true;

  const submit = document.createElement("button");
  submit.type = "submit";
  submit.textContent = "Start discovery session";

  form.append(
    field("Research question (required)", question),
    field("Literature survey (optional)", survey),
    field("Initial blueprint (optional)", blueprint),
    field("Inspiration corpus (one JSON record per line)", corpus),
    field("API key (kept in memory only)", apiKey),
    field("API base URL", baseUrl),
    field("Model name", model),
    error,
    submit,
  );

  const showError = (message: string) => {
    error.textContent = message;
    error.hidden = false;
  };

  form.addEventListener("submit", async (eventObject) => {
    eventObject.preventDefault();
    error.hidden = true;
    if (!question.value.trim()) {
      showError("The research question is required.");
      return;
    }
    if (!corpus.value.trim()) {
      showError("Upload an inspiration corpus first.");
      return;
    }
    submit.disabled = true;
    try {
      const uploaded = await api.uploadCorpus(corpus.value);
      sessionStorage.setItem("moose.base_url", baseUrl.value);
      sessionStorage.setItem("moose.model", model.value);
      const summary = await api.createSession({
        question: question.value,
        survey: survey.value.trim() || undefined,
        blueprint: blueprint.value.trim() || undefined,
        corpus_id: uploaded.corpus_id,
        llm_config: apiKey.value || baseUrl.value || model.value
          ? {
              mode: "live",
              api_key: apiKey.value || undefined,
              base_url: baseUrl.value || undefined,
              model: model.value || undefined,
            }
          : undefined,
      });
      hooks.onCreated(summary);
    } catch (raised) {
      if (raised instanceof ApiError) showError(raised.detail);
      else showError(String(raised));
    } finally {
      submit.disabled = false;
    }
  });

  container.appendChild(form);
}
