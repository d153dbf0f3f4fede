import init, { simulate_and_detect, penalty_curves, null_ecdf } from "./pkg/multiscan_web.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];
const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function heatmap(canvas, m, values, lo, hi) {
  const ctx = canvas.getContext("2d");
  const cell = canvas.width / m;
  const lim = Math.max(3, ...values.map(Math.abs));
  for (let i = 0; i < m; i++) {
    for (let j = 0; j < m; j++) {
      const t = values[i * m + j] / lim;
      const r = t > 0 ? 255 : Math.round(255 * (1 + t));
      const b = t < 0 ? 255 : Math.round(255 * (1 - t));
      const g = Math.round(255 * (1 - Math.abs(t)));
      ctx.fillStyle = `rgb(${r},${g},${b})`;
      ctx.fillRect(j * cell, i * cell, cell, cell);
    }
  }
  ctx.strokeStyle = "#000";
  ctx.lineWidth = 3;
  ctx.strokeRect((lo[1] - 1) * cell, (lo[0] - 1) * cell, (hi[1] - lo[1] + 1) * cell, (hi[0] - lo[0] + 1) * cell);
}

// series: [{name, xs, ys}]
function lines(canvas, series, xlabel) {
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height, pad = 40;
  ctx.clearRect(0, 0, W, H);
  const xs = series.flatMap((s) => s.xs), ys = series.flatMap((s) => s.ys);
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = [Math.min(0, ...ys), Math.max(...ys)];
  const px = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (W - 2 * pad);
  const py = (y) => H - pad - ((y - y0) / (y1 - y0 || 1)) * (H - 2 * pad);
  ctx.strokeStyle = "#888";
  ctx.lineWidth = 1;
  ctx.strokeRect(pad, pad, W - 2 * pad, H - 2 * pad);
  ctx.fillStyle = "#444";
  ctx.font = "12px sans-serif";
  ctx.fillText(x0.toPrecision(3), pad, H - pad + 14);
  ctx.fillText(x1.toPrecision(3), W - pad - 30, H - pad + 14);
  ctx.fillText(y1.toPrecision(3), 2, pad + 4);
  ctx.fillText(y0.toPrecision(3), 2, H - pad);
  ctx.fillText(xlabel, W / 2 - 20, H - 8);
  series.forEach((s, k) => {
    ctx.strokeStyle = COLORS[k % COLORS.length];
    ctx.lineWidth = 2;
    ctx.beginPath();
    s.xs.forEach((x, i) => (i ? ctx.lineTo(px(x), py(s.ys[i])) : ctx.moveTo(px(x), py(s.ys[i]))));
    ctx.stroke();
    ctx.fillStyle = ctx.strokeStyle;
    ctx.fillText(s.name, W - pad - 140, pad + 16 + 16 * k);
  });
}

function runDetect() {
  const out = $("d-out");
  try {
    const d = simulate_and_detect(num("d-m"), $("d-stat").value, num("d-row"), num("d-col"),
      num("d-side"), num("d-mu"), num("d-alpha"), num("d-reps"), BigInt(num("d-seed")));
    const lo = Array.from(d.argmax_lo), hi = Array.from(d.argmax_hi);
    heatmap($("d-canvas"), d.m, Array.from(d.values), lo, hi);
    out.className = "out " + (d.reject ? "reject" : "accept");
    out.textContent = `decision: ${d.reject ? "reject (signal detected)" : "accept"}\n` +
      `statistic: ${d.value.toFixed(4)}   critical value: ${d.kappa.toFixed(4)}\n` +
      `argmax rows ${lo[0]}..${hi[0]}, cols ${lo[1]}..${hi[1]}`;
    d.free();
  } catch (e) {
    out.className = "out";
    out.textContent = String(e);
  }
}

function runPenalty() {
  const n = 200;
  const c = penalty_curves(num("p-v"), Math.pow(10, num("p-exp")), n);
  const logr = Array.from(c.slice(0, n), (r) => Math.log10(r));
  lines($("p-canvas"), [
    { name: "Gamma(r)", xs: logr, ys: Array.from(c.slice(n, 2 * n)) },
    { name: `Gamma_V(r), V=${num("p-v")}`, xs: logr, ys: Array.from(c.slice(2 * n, 3 * n)) },
    { name: "D(r)", xs: logr, ys: Array.from(c.slice(3 * n, 4 * n)) },
  ], "log10 r");
}

function runEcdf() {
  const reps = num("e-reps");
  const series = $("e-ms").value.split(",").map(Number).filter((m) => m > 0).map((m) => {
    const s = Array.from(null_ecdf(m, $("e-stat").value, reps, 1n));
    return { name: `m=${m}`, xs: s, ys: s.map((_, i) => (i + 1) / s.length) };
  });
  lines($("e-canvas"), series, $("e-stat").value);
}

await init();
$("d-run").onclick = runDetect;
$("p-run").onclick = runPenalty;
$("e-run").onclick = runEcdf;
runDetect();
runPenalty();
