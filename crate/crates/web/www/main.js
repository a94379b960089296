import init, { CascadeDemo, downsample_preview, ladder_costs } from "./pkg/rescascade_web.js";

const SIZE = 28;
const FACTORS = [1, 2, 4, 7, 14];
const $ = (id) => document.getElementById(id);

let demo = null;

const draw = $("draw");
const ctx = draw.getContext("2d");

function clearCanvas() {
  ctx.fillStyle = "#000";
  ctx.fillRect(0, 0, draw.width, draw.height);
}

function pixels() {
  const small = document.createElement("canvas");
  small.width = SIZE;
  small.height = SIZE;
  const sctx = small.getContext("2d");
  sctx.drawImage(draw, 0, 0, SIZE, SIZE);
  const rgba = sctx.getImageData(0, 0, SIZE, SIZE).data;
  const gray = new Uint8Array(SIZE * SIZE);
  for (let i = 0; i < gray.length; i++) {
    gray[i] = Math.round(0.299 * rgba[4 * i] + 0.587 * rgba[4 * i + 1] + 0.114 * rgba[4 * i + 2]);
  }
  return gray;
}

function paint(canvas, gray) {
  const c = canvas.getContext("2d");
  const img = c.createImageData(SIZE, SIZE);
  gray.forEach((v, i) => {
    img.data.set([v, v, v, 255], 4 * i);
  });
  c.putImageData(img, 0, 0);
}

function showError(el, e) {
  el.innerHTML = "";
  const p = document.createElement("p");
  p.className = "error";
  p.textContent = String(e.message ?? e);
  el.appendChild(p);
}

function renderPreviews(gray) {
  const box = $("previews");
  box.innerHTML = "";
  for (const f of FACTORS) {
    const wrap = document.createElement("div");
    wrap.className = "preview";
    const c = document.createElement("canvas");
    c.width = SIZE;
    c.height = SIZE;
    c.style.width = c.style.height = "112px";
    try {
      paint(c, downsample_preview(gray, SIZE, SIZE, f, $("pathway").value));
      wrap.append(c, document.createElement("br"), `factor ${f} (${SIZE / f}x${SIZE / f})`);
    } catch (e) {
      showError(wrap, e);
    }
    box.appendChild(wrap);
  }
}

function renderTrace(gray) {
  const out = $("trace");
  if (!demo) {
    out.textContent = "No model loaded.";
    return;
  }
  try {
    const t = demo.trace(gray, SIZE, SIZE, Number($("threshold").value), $("ladder").value,
      $("pathway").value, $("confidence").value);
    const rows = [];
    for (let i = 0; i < t.stage_count; i++) {
      const f = t.stage_factor(i);
      rows.push(`<tr><td>${i + 1}</td><td>${f}</td><td>${SIZE / f}x${SIZE / f}</td>` +
        `<td>${t.stage_class(i)}</td><td>${t.stage_confidence(i).toFixed(4)}</td><td>${t.stage_bytes(i)}</td></tr>`);
    }
    out.innerHTML =
      "<table><tr><th>stage</th><th>factor</th><th>size</th><th>class</th><th>confidence</th><th>bytes</th></tr>" +
      rows.join("") + "</table>" +
      `<p>Predicted class <b>${t.predicted_class}</b> after reading <b>${t.cumulative_bytes}</b> bytes.</p>`;
    t.free();
  } catch (e) {
    showError(out, e);
  }
}

function renderCosts() {
  const out = $("costs");
  try {
    const ladder = $("ladder").value;
    const factors = ladder.split(",").map((s) => s.trim());
    const gray = ladder_costs(28, 28, 1, ladder);
    let rgb = null;
    try {
      rgb = ladder_costs(32, 32, 3, ladder);
    } catch (_) {
      // Ladder may not divide 32.
    }
    const rows = factors.map((f, i) =>
      `<tr><td>${i + 1}</td><td>${f}</td><td>${gray[i]}</td><td>${rgb ? rgb[i] : "n/a"}</td></tr>`);
    out.innerHTML = "<table><tr><th>stop stage</th><th>factor</th><th>28x28x1</th><th>32x32x3</th></tr>" +
      rows.join("") + "</table>";
  } catch (e) {
    showError(out, e);
  }
}

function refresh() {
  const gray = pixels();
  renderPreviews(gray);
  renderTrace(gray);
  renderCosts();
}

function setupDrawing() {
  let down = false;
  const stroke = (ev) => {
    if (!down) return;
    const r = draw.getBoundingClientRect();
    ctx.fillStyle = "#fff";
    ctx.beginPath();
    ctx.arc(ev.clientX - r.left, ev.clientY - r.top, 12, 0, 2 * Math.PI);
    ctx.fill();
  };
  draw.addEventListener("pointerdown", (ev) => { down = true; stroke(ev); });
  draw.addEventListener("pointermove", stroke);
  window.addEventListener("pointerup", () => {
    if (down) {
      down = false;
      refresh();
    }
  });
}

async function main() {
  await init();
  clearCanvas();
  setupDrawing();
  $("clear").onclick = () => { clearCanvas(); refresh(); };
  $("image-file").onchange = async (ev) => {
    const file = ev.target.files[0];
    if (!file) return;
    const bitmap = await createImageBitmap(file);
    clearCanvas();
    ctx.drawImage(bitmap, 0, 0, draw.width, draw.height);
    refresh();
  };
  $("model-file").onchange = async (ev) => {
    const file = ev.target.files[0];
    if (!file) return;
    try {
      const next = new CascadeDemo(new Uint8Array(await file.arrayBuffer()));
      if (demo) demo.free();
      demo = next;
      $("model-status").textContent = `${demo.num_classes} classes, ${demo.input_size} inputs`;
    } catch (e) {
      $("model-status").textContent = String(e.message ?? e);
    }
    refresh();
  };
  $("threshold").oninput = () => {
    $("threshold-value").textContent = Number($("threshold").value).toFixed(3);
    renderTrace(pixels());
  };
  for (const id of ["pathway", "ladder", "confidence"]) {
    $(id).onchange = refresh;
  }
  refresh();
}

main();
