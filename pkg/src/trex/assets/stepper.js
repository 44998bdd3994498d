/* Execution-stepper playback widget.
 *
 * For every JSON data block (script element, class trex-stepper-data),
 * the matching div.trex-stepper host with the same data-trex-stepper id
 * is replaced with an interactive frame player: slider + buttons +
 * arrow keys move through recorded stop frames; each frame highlights
 * its source line inside the captured source windows and shows the
 * frame's rendered body. Everything is read from the inline JSON —
 * the widget performs no network requests.
 */
(function () {
  "use strict";

  var SCHEMA_VERSION = 1;

  function el(tag, className, text) {
    var node = document.createElement(tag);
    if (className) node.className = className;
    if (text !== undefined) node.textContent = text;
    return node;
  }

  function renderWindows(container, data, frame) {
    container.textContent = "";
    data.source_windows.forEach(function (win) {
      var pre = el("pre", "trex-code");
      pre.setAttribute("data-file", win.file);
      pre.setAttribute("data-first-line", String(win.first_line));
      win.lines.forEach(function (lineText, i) {
        var lineNo = win.first_line + i;
        var span = el("span", "trex-line");
        span.setAttribute("data-line", String(lineNo));
        span.textContent = lineText;
        if (frame && frame.file === win.file && frame.line === lineNo) {
          span.className += " trex-current-line";
        }
        pre.appendChild(span);
        pre.appendChild(document.createTextNode("\n"));
      });
      container.appendChild(pre);
    });
  }

  function mount(host, data) {
    var frames = data.frames;
    host.textContent = "";
    host.setAttribute("tabindex", "0");

    if (!frames.length) {
      host.appendChild(
        el("p", "trex-stepper-notice", "No frames were recorded.")
      );
      var windowsOnly = el("div", "trex-stepper-windows");
      renderWindows(windowsOnly, data, null);
      host.appendChild(windowsOnly);
      return;
    }

    var controls = el("div", "trex-stepper-controls");
    var prev = el("button", "trex-stepper-prev", "◀");
    prev.type = "button";
    var next = el("button", "trex-stepper-next", "▶");
    next.type = "button";
    var slider = document.createElement("input");
    slider.type = "range";
    slider.min = "0";
    slider.max = String(frames.length - 1);
    slider.value = "0";
    var status = el("span", "trex-stepper-status");
    controls.appendChild(prev);
    controls.appendChild(slider);
    controls.appendChild(next);
    controls.appendChild(status);

    var windows = el("div", "trex-stepper-windows");
    var body = el("div", "trex-stepper-body");
    host.appendChild(controls);
    host.appendChild(windows);
    host.appendChild(body);

    var current = 0;
    function show(index) {
      current = Math.max(0, Math.min(frames.length - 1, index));
      var frame = frames[current];
      slider.value = String(current);
      status.textContent =
        "frame " + (current + 1) + " of " + frames.length +
        " — " + frame.file + ":" + frame.line;
      renderWindows(windows, data, frame);
      body.innerHTML = frame.html;
      prev.disabled = current === 0;
      next.disabled = current === frames.length - 1;
    }

    prev.addEventListener("click", function () { show(current - 1); });
    next.addEventListener("click", function () { show(current + 1); });
    slider.addEventListener("input", function () {
      show(parseInt(slider.value, 10) || 0);
    });
    host.addEventListener("keydown", function (event) {
      if (event.key === "ArrowLeft") { show(current - 1); event.preventDefault(); }
      if (event.key === "ArrowRight") { show(current + 1); event.preventDefault(); }
    });

    show(0);
  }

  function boot() {
    var blocks = document.querySelectorAll("script.trex-stepper-data");
    Array.prototype.forEach.call(blocks, function (block) {
      var host = document.querySelector(
        '[data-trex-stepper="' + block.id + '"]'
      );
      if (!host) return;
      var data;
      try {
        data = JSON.parse(block.textContent);
      } catch (err) {
        host.appendChild(
          el("p", "trex-stepper-notice", "Stepper data is unreadable.")
        );
        return;
      }
      if (!data || data.version !== SCHEMA_VERSION) {
        host.appendChild(
          el(
            "p",
            "trex-stepper-notice",
            "Stepper data uses an unsupported schema version."
          )
        );
        return;
      }
      mount(host, data);
    });
  }

  if (document.readyState === "loading") {
    document.addEventListener("DOMContentLoaded", boot);
  } else {
    boot();
  }
})();
