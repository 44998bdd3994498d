/**
 * Scrub-through playback widget for recorded debugger frame sequences.
 *
 * A built page embeds, per stepper, one
 * `<script type="application/json" class="trex-stepper-data" id=ID>` block
 * holding the recorded data and one `<div class="trex-stepper"
 * data-trex-stepper=ID>` host. `boot()` pairs them up and replaces each
 * host's static fallback with an interactive player: slider, prev/next
 * buttons, and arrow keys move through the recorded frames; each frame
 * highlights its source line inside the captured source windows and shows
 * the frame's rendered body. Everything is read from the inline JSON —
 * playback never touches the network and never mutates the data.
 */

export const SCHEMA_VERSION = 1;

export interface SourceWindow {
  readonly file: string;
  readonly first_line: number;
  readonly lines: readonly string[];
}

export interface StepperFrame {
  readonly index: number;
  readonly file: string;
  readonly line: number;
  readonly html: string;
}

export interface StepperData {
  readonly version: number;
  readonly source_windows: readonly SourceWindow[];
  readonly frames: readonly StepperFrame[];
}

/** Raised when a data block cannot back a widget. `notice` is the short
 * reader-facing text to render in place of the player. */
export class StepperDataError extends Error {
  constructor(readonly notice: string, detail?: string) {
    super(detail ? `${notice} (${detail})` : notice);
    this.name = "StepperDataError";
  }
}

const UNREADABLE = "Stepper data is unreadable.";
const BAD_VERSION = "Stepper data uses an unsupported schema version.";
const NO_FRAMES = "No frames were recorded.";

function isSourceWindow(value: unknown): value is SourceWindow {
  const win = value as SourceWindow;
  return (
    typeof win === "object" &&
    win !== null &&
    typeof win.file === "string" &&
    typeof win.first_line === "number" &&
    Array.isArray(win.lines) &&
    win.lines.every((line) => typeof line === "string")
  );
}

function isFrame(value: unknown): value is StepperFrame {
  const frame = value as StepperFrame;
  return (
    typeof frame === "object" &&
    frame !== null &&
    typeof frame.index === "number" &&
    typeof frame.file === "string" &&
    typeof frame.line === "number" &&
    typeof frame.html === "string"
  );
}

/** Parse and validate one embedded data block. */
export function parseStepperData(text: string): StepperData {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (err) {
    throw new StepperDataError(UNREADABLE, String(err));
  }
  const data = raw as StepperData;
  if (typeof data !== "object" || data === null) {
    throw new StepperDataError(UNREADABLE, "not an object");
  }
  if (data.version !== SCHEMA_VERSION) {
    throw new StepperDataError(BAD_VERSION, `version ${String(data.version)}`);
  }
  if (
    !Array.isArray(data.source_windows) ||
    !data.source_windows.every(isSourceWindow)
  ) {
    throw new StepperDataError(UNREADABLE, "malformed source windows");
  }
  if (!Array.isArray(data.frames) || !data.frames.every(isFrame)) {
    throw new StepperDataError(UNREADABLE, "malformed frames");
  }
  return data;
}

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/** One mounted player. Construction renders frame 0 (or the empty-data
 * notice); `gotoFrame` clamps, so the view index is always in bounds. */
export class StepperWidget {
  readonly data: StepperData;

  private index = 0;
  private readonly host: HTMLElement;
  private readonly prevButton: HTMLButtonElement;
  private readonly nextButton: HTMLButtonElement;
  private readonly slider: HTMLInputElement;
  private readonly status: HTMLElement;
  private readonly windowsPane: HTMLElement;
  private readonly bodyPane: HTMLElement;

  constructor(host: HTMLElement, data: StepperData) {
    this.data = data;
    this.host = host;
    host.textContent = "";
    host.setAttribute("tabindex", "0");

    const controls = el("div", "trex-stepper-controls");
    this.prevButton = el("button", "trex-stepper-prev", "◀") as HTMLButtonElement;
    this.prevButton.type = "button";
    this.prevButton.setAttribute("aria-label", "previous frame");
    this.nextButton = el("button", "trex-stepper-next", "▶") as HTMLButtonElement;
    this.nextButton.type = "button";
    this.nextButton.setAttribute("aria-label", "next frame");
    this.slider = document.createElement("input");
    this.slider.type = "range";
    this.slider.min = "0";
    this.slider.max = String(Math.max(0, data.frames.length - 1));
    this.slider.value = "0";
    this.slider.setAttribute("aria-label", "frame");
    this.status = el("span", "trex-stepper-status");
    controls.append(this.prevButton, this.slider, this.nextButton, this.status);

    this.windowsPane = el("div", "trex-stepper-windows");
    this.bodyPane = el("div", "trex-stepper-body");

    if (data.frames.length === 0) {
      host.appendChild(el("p", "trex-stepper-notice", NO_FRAMES));
      this.prevButton.disabled = true;
      this.nextButton.disabled = true;
      this.slider.disabled = true;
      host.append(controls, this.windowsPane);
      this.renderWindows(null);
      return;
    }

    host.append(controls, this.windowsPane, this.bodyPane);
    this.prevButton.addEventListener("click", () => this.gotoFrame(this.index - 1));
    this.nextButton.addEventListener("click", () => this.gotoFrame(this.index + 1));
    this.slider.addEventListener("input", () => {
      this.gotoFrame(parseInt(this.slider.value, 10) || 0);
    });
    host.addEventListener("keydown", (event: KeyboardEvent) => {
      if (event.key === "ArrowLeft") {
        this.gotoFrame(this.index - 1);
        event.preventDefault();
      } else if (event.key === "ArrowRight") {
        this.gotoFrame(this.index + 1);
        event.preventDefault();
      }
    });
    this.gotoFrame(0);
  }

  /** Current frame index, or -1 when nothing was recorded. */
  get frameIndex(): number {
    return this.data.frames.length ? this.index : -1;
  }

  gotoFrame(index: number): void {
    const frames = this.data.frames;
    if (!frames.length) return;
    this.index = Math.max(0, Math.min(frames.length - 1, index));
    const frame = frames[this.index]!;
    this.slider.value = String(this.index);
    this.status.textContent =
      `frame ${this.index + 1} of ${frames.length} — ${frame.file}:${frame.line}`;
    this.renderWindows(frame);
    this.bodyPane.innerHTML = frame.html;
    this.prevButton.disabled = this.index === 0;
    this.nextButton.disabled = this.index === frames.length - 1;
  }

  private renderWindows(frame: StepperFrame | null): void {
    this.windowsPane.textContent = "";
    let current: HTMLElement | null = null;
    for (const win of this.data.source_windows) {
      const pre = el("pre", "trex-code");
      pre.setAttribute("data-file", win.file);
      pre.setAttribute("data-first-line", String(win.first_line));
      win.lines.forEach((lineText, i) => {
        const lineNo = win.first_line + i;
        const span = el("span", "trex-line", lineText);
        span.setAttribute("data-line", String(lineNo));
        if (frame && frame.file === win.file && frame.line === lineNo) {
          span.classList.add("trex-current-line");
          current = span;
        }
        pre.appendChild(span);
        pre.appendChild(document.createTextNode("\n"));
      });
      this.windowsPane.appendChild(pre);
    }
    if (current !== null && typeof (current as HTMLElement).scrollIntoView === "function") {
      (current as HTMLElement).scrollIntoView({ block: "nearest" });
    }
  }
}

/** Mount a player onto `host` from already-parsed data. */
export function mount(host: HTMLElement, data: StepperData): StepperWidget {
  return new StepperWidget(host, data);
}

/**
 * Find every embedded data block under `root`, pair it with its host by id,
 * and mount. A block that fails to parse renders its notice inside its own
 * host and leaves the rest of the page alone. Returns the mounted widgets.
 */
export function boot(root: ParentNode = document): StepperWidget[] {
  const widgets: StepperWidget[] = [];
  const blocks = root.querySelectorAll("script.trex-stepper-data");
  blocks.forEach((block) => {
    const host = root.querySelector<HTMLElement>(
      `[data-trex-stepper="${block.id}"]`
    );
    if (!host) return;
    let data: StepperData;
    try {
      data = parseStepperData(block.textContent ?? "");
    } catch (err) {
      const notice =
        err instanceof StepperDataError ? err.notice : UNREADABLE;
      host.appendChild(el("p", "trex-stepper-notice", notice));
      return;
    }
    widgets.push(mount(host, data));
  });
  return widgets;
}
