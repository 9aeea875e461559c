import { SchemaNode, UISchema } from "./schema.js";
import { ConsoleSession } from "./session.js";

export interface RenderOptions {
  document: Document;
  /** Resolves a pictogram id to an asset URL. Absent means no asset source. */
  pictogramUrl?: (pictogramId: string) => string;
  /** Override asset availability (used to exercise the fallback path). */
  assetAvailable?: (pictogramId: string) => boolean;
  /** Session drives which navigation buttons are enabled. */
  session?: ConsoleSession;
  onNavigate?: (target: string) => void;
  onFeedback?: (rating: number, componentId: string) => void;
}

/** Where a navigation button leads, inferred from its label. */
export function navigationTarget(label: string): string {
  const lowered = label.toLowerCase();
  if (lowered.includes("help")) return "RequestingHelp";
  if (
    lowered.includes("finish") ||
    lowered.includes("done") ||
    lowered.includes("complete")
  ) {
    return "CompletingTask";
  }
  return "NavigatingSteps";
}

function applyColors(el: HTMLElement, node: SchemaNode): void {
  el.style.color = node.colors.foreground;
  el.style.backgroundColor = node.colors.background;
}

function applyTargetSize(el: HTMLElement, node: SchemaNode): void {
  const [w, h] = node.targetSize;
  if (w > 0) el.style.minWidth = `${w}px`;
  if (h > 0) el.style.minHeight = `${h}px`;
}

function renderNode(node: SchemaNode, opts: RenderOptions): HTMLElement {
  const doc = opts.document;
  let el: HTMLElement;

  switch (node.kind) {
    case "Container": {
      el = doc.createElement("main");
      el.className = "af-container";
      if (node.content) {
        const plain = doc.createElement("p");
        plain.className = "af-plain";
        plain.textContent = node.content;
        el.appendChild(plain);
      }
      break;
    }
    case "AlertBanner": {
      el = doc.createElement("div");
      el.className = "af-alert";
      el.setAttribute("role", "alert");
      el.textContent = node.content;
      break;
    }
    case "StepBlock": {
      el = doc.createElement("section");
      el.className = "af-step";
      if (node.stepNumber !== undefined) {
        el.dataset.stepNumber = String(node.stepNumber);
        const badge = doc.createElement("span");
        badge.className = "af-step-number";
        badge.textContent = String(node.stepNumber);
        el.appendChild(badge);
      }
      const text = doc.createElement("p");
      text.className = "af-step-text";
      text.textContent = node.content;
      el.appendChild(text);
      break;
    }
    case "PictogramLabel": {
      el = doc.createElement("figure");
      el.className = "af-picto";
      const id = node.pictogramId ?? node.content;
      const alt = node.alt ?? node.content;
      const available =
        opts.pictogramUrl !== undefined &&
        (opts.assetAvailable === undefined || opts.assetAvailable(id));
      if (available && opts.pictogramUrl) {
        const img = doc.createElement("img");
        img.src = opts.pictogramUrl(id);
        img.alt = alt;
        el.appendChild(img);
      } else {
        // asset unresolved: degrade to the alt text and flag it visibly
        const fallback = doc.createElement("span");
        fallback.className = "af-picto-missing";
        fallback.setAttribute("role", "img");
        fallback.setAttribute("aria-label", alt);
        fallback.dataset.flagged = "true";
        fallback.textContent = alt;
        el.appendChild(fallback);
      }
      break;
    }
    case "Button": {
      const button = doc.createElement("button");
      button.type = "button";
      button.className = "af-nav-button";
      button.textContent = node.content;
      const target = navigationTarget(node.content);
      button.dataset.navTarget = target;
      if (opts.session && !opts.session.canNavigate(target)) {
        button.disabled = true;
      }
      button.addEventListener("click", () => {
        if (opts.session) {
          if (!opts.session.canNavigate(target)) return;
          opts.session.navigate(target);
        }
        opts.onNavigate?.(target);
      });
      el = button;
      break;
    }
    case "FeedbackScale": {
      const fieldset = doc.createElement("fieldset");
      fieldset.className = "af-feedback";
      const legend = doc.createElement("legend");
      legend.textContent = node.content;
      fieldset.appendChild(legend);
      for (let rating = 1; rating <= 5; rating++) {
        const label = doc.createElement("label");
        const radio = doc.createElement("input");
        radio.type = "radio";
        radio.name = `fb-${node.componentId}`;
        radio.value = String(rating);
        label.appendChild(radio);
        label.appendChild(doc.createTextNode(String(rating)));
        fieldset.appendChild(label);
      }
      const submit = doc.createElement("button");
      submit.type = "button";
      submit.className = "af-feedback-submit";
      submit.textContent = "Send feedback";
      submit.addEventListener("click", () => {
        const checked = fieldset.querySelector<HTMLInputElement>(
          "input[type=radio]:checked",
        );
        if (!checked) return; // nothing selected yet
        const rating = Number(checked.value);
        if (!Number.isInteger(rating) || rating < 1 || rating > 5) return;
        opts.onFeedback?.(rating, node.componentId);
      });
      fieldset.appendChild(submit);
      el = fieldset;
      break;
    }
  }

  el.dataset.componentId = node.componentId;
  el.dataset.kind = node.kind;
  applyColors(el, node);
  applyTargetSize(el, node);
  for (const child of node.children) {
    el.appendChild(renderNode(child, opts));
  }
  return el;
}

/**
 * Render a parsed schema into a detached element. The caller attaches it.
 *
 * Audio is only ever emitted when the schema's modalities include it; a
 * schema that excludes Audio renders with zero audio elements.
 */
export function renderSchema(schema: UISchema, opts: RenderOptions): HTMLElement {
  const doc = opts.document;
  const wrapper = doc.createElement("div");
  wrapper.className =
    schema.theme === "HighContrast"
      ? "af-schema af-theme-highcontrast"
      : "af-schema af-theme-default";
  wrapper.dataset.theme = schema.theme;

  if (schema.modalities.includes("Audio")) {
    const audio = doc.createElement("audio");
    audio.controls = true;
    audio.className = "af-readaloud";
    wrapper.appendChild(audio);
  }

  wrapper.appendChild(renderNode(schema.root, opts));
  return wrapper;
}
