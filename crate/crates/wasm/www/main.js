// Generated by `wasm-bindgen --target web --out-dir www/pkg`.
import init, { simulateAndMerge, sweepCurve, segmentRows } from "./pkg/longnet_wasm.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function axes(ctx, w, h, pad, xmax, ymin, ymax) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  const x = (v) => pad + (v / xmax) * (w - 2 * pad);
  const y = (v) => h - pad - ((v - ymin) / (ymax - ymin || 1)) * (h - 2 * pad);
  return { x, y };
}

function vline(ctx, x, top, bottom, color, dash) {
  ctx.strokeStyle = color;
  ctx.setLineDash(dash);
  ctx.beginPath();
  ctx.moveTo(x, top);
  ctx.lineTo(x, bottom);
  ctx.stroke();
  ctx.setLineDash([]);
}

// Rows of the normalized temporal factor as lines over interval midpoints,
// with true (dashed) and estimated (solid) change points.
function drawMerge(r, horizon) {
  const c = $("merge-canvas"), ctx = c.getContext("2d"), pad = 24;
  const rows = r.w_rows, L = rows.length, d = rows[0].length;
  const all = rows.flat();
  const { x, y } = axes(ctx, c.width, c.height, pad, horizon, Math.min(...all), Math.max(...all));
  const mid = (l) => (horizon * (l + 0.5)) / L;
  for (let k = 0; k < d; k++) {
    ctx.strokeStyle = COLORS[k % COLORS.length];
    ctx.beginPath();
    rows.forEach((row, l) => (l ? ctx.lineTo(x(mid(l)), y(row[k])) : ctx.moveTo(x(mid(l)), y(row[k]))));
    ctx.stroke();
  }
  r.eta_true.slice(0, -1).forEach((e) => vline(ctx, x(e), pad, c.height - pad, "#555", [5, 4]));
  r.eta_hat.slice(0, -1).forEach((e) => vline(ctx, x(e), pad, c.height - pad, "#000", []));
}

function drawCurve(canvasId, xs, ys, logx) {
  const c = $(canvasId), ctx = c.getContext("2d"), pad = 28;
  const tx = xs.map((v) => (logx ? Math.log2(v) : v));
  const x0 = Math.min(...tx), x1 = Math.max(...tx);
  const { x, y } = axes(ctx, c.width, c.height, pad, 1, Math.min(0, ...ys), Math.max(...ys));
  const sx = (v) => x((v - x0) / (x1 - x0 || 1));
  ctx.strokeStyle = COLORS[0];
  ctx.beginPath();
  tx.forEach((v, i) => (i ? ctx.lineTo(sx(v), y(ys[i])) : ctx.moveTo(sx(v), y(ys[i]))));
  ctx.stroke();
  ctx.fillStyle = "#000";
  tx.forEach((v, i) => {
    ctx.fillRect(sx(v) - 2, y(ys[i]) - 2, 4, 4);
    ctx.fillText(String(xs[i]), sx(v) - 6, c.height - 8);
  });
}

function guard(outId, f) {
  const out = $(outId);
  try {
    out.classList.remove("err");
    f(out);
  } catch (e) {
    out.classList.add("err");
    out.textContent = String(e.message || e);
  }
}

function runMerge() {
  guard("merge-out", (out) => {
    const horizon = num("horizon");
    const r = JSON.parse(simulateAndMerge(num("n"), horizon, num("k0"), num("seed"), num("intervals")));
    drawMerge(r, horizon);
    const f = (v) => v.map((e) => e.toFixed(2)).join(", ");
    out.textContent =
      `${r.edges} edges; K_hat = ${r.k_hat} (nu = ${r.nu.toFixed(4)})\n` +
      `true change points:      ${f(r.eta_true)}\n` +
      `estimated change points: ${f(r.eta_hat)}\n` +
      `error, equal intervals: ${r.initial_error.toExponential(3)}; after merging: ${r.merged_error.toExponential(3)}`;
  });
}

function runSweep() {
  guard("sweep-out", (out) => {
    const r = JSON.parse(sweepCurve(num("n"), num("horizon"), num("k0"), num("seed"), $("grid").value));
    drawCurve("sweep-canvas", r.l_values, r.errors, true);
    out.textContent = r.l_values.map((l, i) => `L = ${l}: ${r.errors[i].toExponential(3)}`).join("\n");
  });
}

function runSegment() {
  guard("segment-out", (out) => {
    const rows = $("rows").value.trim().split(/\n+/).map((line) => line.split(",").map(Number));
    const r = JSON.parse(segmentRows(JSON.stringify(rows), num("nu"), num("kmax"), num("n"), num("horizon")));
    const first = rows.map((row) => row[0]);
    drawCurve("segment-canvas", rows.map((_, i) => i + 1), first, false);
    const c = $("segment-canvas"), ctx = c.getContext("2d"), pad = 28;
    const step = (c.width - 2 * pad) / Math.max(rows.length - 1, 1);
    r.segments.slice(0, -1).forEach(([, end]) => vline(ctx, pad + (end + 0.5) * step, pad, c.height - pad, "#d62728", []));
    out.textContent =
      `${r.k} segments: ` + r.segments.map(([a, b]) => `${a + 1}-${b + 1}`).join(", ") +
      `\ncriterion by segment count: ` + r.criterion.map((v) => v.toFixed(4)).join(", ");
  });
}

await init();
$("run-merge").onclick = runMerge;
$("run-sweep").onclick = runSweep;
$("run-segment").onclick = runSegment;
runMerge();
