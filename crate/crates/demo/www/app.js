import init, {
  spiral_curve, spiral_init, chirp, chirp_mismatch, Surrogate,
} from "./pkg/gwsurr_demo.js";

const CHIRP_SAMPLES = 4096;
const T_END = 4990;
const $ = (id) => document.getElementById(id);

function bounds(xs) {
  let lo = Infinity, hi = -Infinity;
  for (const x of xs) { if (x < lo) lo = x; if (x > hi) hi = x; }
  if (lo === hi) { lo -= 1; hi += 1; }
  return [lo, hi];
}

// Line plot of several series sharing one x axis.
function plot(canvas, x, series, opts = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 34;
  ctx.clearRect(0, 0, w, h);
  const [x0, x1] = opts.xRange ?? bounds(x);
  const [y0, y1] = opts.yRange ?? bounds(series.flatMap((s) => Array.from(s.y)));
  const sx = (v) => pad + ((v - x0) / (x1 - x0)) * (w - 2 * pad);
  const sy = (v) => h - pad - ((v - y0) / (y1 - y0)) * (h - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  ctx.fillText(x0.toPrecision(3), pad, h - pad + 14);
  ctx.fillText(x1.toPrecision(3), w - pad - 24, h - pad + 14);
  ctx.fillText(y1.toPrecision(3), 2, pad + 4);
  ctx.fillText(y0.toPrecision(3), 2, h - pad);
  if (opts.xLabel) ctx.fillText(opts.xLabel, w / 2 - 10, h - 6);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = s.width ?? 1;
    ctx.beginPath();
    s.y.forEach((v, i) => (i ? ctx.lineTo(sx(x[i]), sy(v)) : ctx.moveTo(sx(x[i]), sy(v))));
    ctx.stroke();
  }
  for (const m of opts.marks ?? []) {
    ctx.strokeStyle = "#2a2";
    ctx.beginPath();
    ctx.moveTo(sx(m), pad);
    ctx.lineTo(sx(m), h - pad);
    ctx.stroke();
  }
}

const every = (arr, start, step = 2) => arr.filter((_, i) => i % step === start);
const times = (n, t0, t1) => Array.from({ length: n }, (_, i) => t0 + ((t1 - t0) * i) / (n - 1));

// Spiral explorer
const sliders = ["sw", "sb", "sa", "sbeta"];

function resetSpiral() {
  spiral_init(1, 2).forEach((v, i) => ($(sliders[i]).value = v));
  drawSpiral();
}

function drawSpiral() {
  const [w, b, a, beta] = sliders.map((id) => parseFloat($(id).value));
  sliders.forEach((id) => ($(`${id}-v`).textContent = parseFloat($(id).value).toFixed(3)));
  const n = 400;
  const pts = spiral_curve(w, b, a, beta, 1, 2, n);
  const canvas = $("spiral-canvas");
  const ctx = canvas.getContext("2d");
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  let r = 1e-9;
  for (const v of pts) r = Math.max(r, Math.abs(v));
  const s = (width / 2 - 12) / r;
  ctx.strokeStyle = "#eee";
  ctx.beginPath();
  ctx.moveTo(width / 2, 0); ctx.lineTo(width / 2, height);
  ctx.moveTo(0, height / 2); ctx.lineTo(width, height / 2);
  ctx.stroke();
  for (let i = 0; i < n; i++) {
    const t = i / (n - 1);
    ctx.fillStyle = `rgb(${Math.round(255 * t)}, 40, ${Math.round(255 * (1 - t))})`;
    ctx.fillRect(width / 2 + s * pts[2 * i] - 1.5, height / 2 - s * pts[2 * i + 1] - 1.5, 3, 3);
  }
}

// Chirp explorer
function drawChirps() {
  const q1 = parseFloat($("q1").value);
  const q2 = parseFloat($("q2").value);
  $("q1-v").textContent = q1.toFixed(3);
  $("q2-v").textContent = q2.toFixed(3);
  const t = times(CHIRP_SAMPLES, 0, T_END);
  const h1 = every(chirp(q1, CHIRP_SAMPLES), 0);
  const h2 = every(chirp(q2, CHIRP_SAMPLES), 0);
  $("mm").textContent = chirp_mismatch(q1, q2, CHIRP_SAMPLES).toExponential(3);
  plot($("chirp-canvas"), t, [
    { y: h1, color: "#1f5fbf" },
    { y: h2, color: "#d0452b" },
  ], { xLabel: "t" });
}

// Basis and interpolation explorer
let surrogate = null;

function build() {
  const n = parseInt($("ntrain").value, 10);
  const tol = parseFloat($("tol").value);
  $("eim-info").textContent = "building...";
  setTimeout(() => {
    try {
      surrogate?.free();
      const t0 = performance.now();
      surrogate = new Surrogate(n, 2048, tol);
      const ms = performance.now() - t0;
      const errs = surrogate.greedy_errors();
      $("eim-info").textContent =
        `m = ${surrogate.size()}, final greedy error ${errs[errs.length - 1].toExponential(2)}, ` +
        `cond(V) = ${surrogate.condition().toFixed(2)}, ${ms.toFixed(0)} ms`;
      const sel = $("coef");
      sel.innerHTML = "";
      for (let j = 0; j < surrogate.size(); j++) sel.add(new Option(`a${j + 1}`, j));
      drawCoefficient();
      drawReconstruction();
    } catch (e) {
      $("eim-info").textContent = `error: ${e.message ?? e}`;
    }
  }, 10);
}

function drawCoefficient() {
  if (!surrogate) return;
  const j = parseInt($("coef").value, 10);
  const a = surrogate.coefficient(j);
  plot($("coef-canvas"), Array.from(surrogate.q_values()), [
    { y: every(a, 0), color: "#1f5fbf", width: 1.5 },
    { y: every(a, 1), color: "#d0452b", width: 1.5 },
  ], { xLabel: "q (blue: real, red: imaginary)" });
}

function drawReconstruction() {
  if (!surrogate) return;
  const q = parseFloat($("qe").value);
  $("qe-v").textContent = q.toFixed(4);
  const both = surrogate.compare(q);
  const half = both.length / 2;
  const t = times(half, 0, T_END);
  const lo = Math.floor(half * 0.9);
  plot($("rec-canvas"), t.slice(lo), [
    { y: Array.from(both.slice(lo, half)), color: "#999", width: 3 },
    { y: Array.from(both.slice(half + lo)), color: "#d0452b" },
  ], { xLabel: "t (last 10%; grey: true, red: spline surrogate)", marks: Array.from(surrogate.node_times()).filter((x) => x >= t[lo]) });
  $("eim-mm").textContent =
    `mismatch with exact node values ${surrogate.exact_mismatch(q).toExponential(3)}, ` +
    `with spline coefficients ${surrogate.spline_mismatch(q).toExponential(3)}`;
}

await init();
sliders.forEach((id) => $(id).addEventListener("input", drawSpiral));
$("sreset").addEventListener("click", resetSpiral);
["q1", "q2"].forEach((id) => $(id).addEventListener("input", drawChirps));
$("build").addEventListener("click", build);
$("coef").addEventListener("change", drawCoefficient);
$("qe").addEventListener("input", drawReconstruction);
resetSpiral();
drawChirps();
build();
