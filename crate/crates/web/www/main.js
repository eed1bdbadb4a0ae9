import init, { groundState, truncation, mpCurve } from "./pkg/spikelab_web.js";

const COLORS = ["#1b6ac9", "#d2452b", "#2f9e44"];

function plot(canvas, x, series) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 32;
  ctx.clearRect(0, 0, w, h);
  const ys = series.flatMap((s) => s.y);
  const [x0, x1] = [Math.min(...x), Math.max(...x)];
  let [y0, y1] = [Math.min(0, ...ys), Math.max(...ys)];
  if (y1 === y0) y1 = y0 + 1;
  const px = (v) => pad + ((v - x0) / (x1 - x0)) * (w - 2 * pad);
  const py = (v) => h - pad - ((v - y0) / (y1 - y0)) * (h - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(pad, py(0));
  ctx.lineTo(w - pad, py(0));
  ctx.stroke();
  ctx.fillStyle = "#666";
  ctx.fillText(y1.toPrecision(3), 2, py(y1) + 4);
  ctx.fillText(y0.toPrecision(3), 2, py(y0));
  ctx.fillText(x1.toPrecision(3), w - pad - 12, h - 10);
  series.forEach((s, k) => {
    ctx.strokeStyle = COLORS[k % COLORS.length];
    ctx.beginPath();
    s.y.forEach((v, i) => (i ? ctx.lineTo(px(x[i]), py(v)) : ctx.moveTo(px(x[i]), py(v))));
    ctx.stroke();
    ctx.fillStyle = ctx.strokeStyle;
    ctx.fillText(s.label, w - pad - 80, pad + 14 * k);
  });
}

const num = (id) => parseFloat(document.getElementById(id).value);
const show = (id, text) => (document.getElementById(id).textContent = text);

function call(fn, outId) {
  const v = JSON.parse(fn());
  if (v.error) show(outId, "error: " + v.error);
  return v.error ? null : v;
}

function runGround() {
  const v = call(() => groundState(num("gs-q"), num("gs-k")), "gs-out");
  if (!v) return;
  plot(document.getElementById("gs-plot"), v.r, [{ y: v.u, label: "U(r)" }]);
  show("gs-out", `m = ${v.m.toFixed(8)}   U(0) = ${v.u0.toFixed(6)}   ` +
    `Pohozaev ${v.pohozaev_residual.toExponential(2)}   Nehari ${v.nehari_residual.toExponential(2)}`);
}

function runTruncation() {
  const v = call(() => truncation(num("tr-q"), num("tr-frac"), num("tr-alpha")), "tr-out");
  if (!v) return;
  plot(document.getElementById("tr-plot"), v.s, [
    { y: v.f, label: "f" },
    { y: v.f_tilde, label: "f~" },
  ]);
  show("tr-out", `a = ${v.a.toFixed(6)}   crossover r = ${v.crossover.toFixed(6)}`);
}

function runCurve() {
  const v = call(() => mpCurve(num("mp-q"), num("mp-k")), "mp-out");
  if (!v) return;
  plot(document.getElementById("mp-plot"), v.t, [{ y: v.energy, label: "energy" }]);
  show("mp-out", `m = ${v.m.toFixed(8)}   max = ${v.max_energy.toFixed(8)}   ` +
    `t at U = ${v.t_ground.toFixed(4)}   end = ${v.endpoint_energy.toFixed(4)}`);
}

await init();
document.getElementById("gs-run").onclick = runGround;
document.getElementById("tr-frac").oninput = runTruncation;
document.getElementById("tr-q").onchange = runTruncation;
document.getElementById("tr-alpha").onchange = runTruncation;
document.getElementById("mp-run").onclick = runCurve;
runGround();
runTruncation();
runCurve();
