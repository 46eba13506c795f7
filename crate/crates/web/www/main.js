import init, { envelope_curve, chatter_p1, unilateral } from "./pkg/relax_web.js";

const $ = (id) => document.getElementById(id);

function plot(canvas, series, xs) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const ys = series.flatMap((s) => s.y).filter((v) => v !== null && Number.isFinite(v));
  let lo = Math.min(...ys), hi = Math.max(...ys);
  if (hi - lo < 1e-12) { lo -= 1; hi += 1; }
  const pad = 0.08 * (hi - lo);
  lo -= pad; hi += pad;
  const x0 = xs[0], x1 = xs[xs.length - 1];
  const px = (x) => 30 + ((x - x0) / (x1 - x0)) * (w - 40);
  const py = (y) => h - 10 - ((y - lo) / (hi - lo)) * (h - 20);
  ctx.strokeStyle = "#eee";
  ctx.beginPath();
  ctx.moveTo(30, py(0)); ctx.lineTo(w - 10, py(0));
  ctx.stroke();
  ctx.fillStyle = "#666";
  ctx.fillText(hi.toPrecision(3), 2, 12);
  ctx.fillText(lo.toPrecision(3), 2, h - 2);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = s.width ?? 1.5;
    ctx.beginPath();
    let pen = false;
    s.y.forEach((y, i) => {
      if (y === null) { pen = false; return; }
      const X = px(xs[i]), Y = py(y);
      if (pen) ctx.lineTo(X, Y); else ctx.moveTo(X, Y);
      pen = true;
    });
    ctx.stroke();
    for (const [x, y] of s.dots ?? []) {
      ctx.fillStyle = s.color;
      ctx.fillRect(px(x) - 2, py(y) - 2, 4, 4);
    }
  }
}

function bind(ids, render) {
  for (const id of ids) {
    $(id).addEventListener("input", () => { $(id + "-out").value = $(id).value; guard(render); });
    $(id + "-out").value = $(id).value;
  }
}

function guard(f) {
  try { f(); $("error").textContent = ""; } catch (e) { $("error").textContent = String(e); }
}

function renderEnvelope() {
  const c = Number($("env-c").value), w = Number($("env-w").value), n = Number($("env-n").value);
  const d = JSON.parse(envelope_curve(c, w, n));
  const cost = (u) => c * u * u + w * (1 - u * u) ** 2;
  plot($("env-plot"), [
    { y: d.cost, color: "#999" },
    { y: d.envelope, color: "#c33", width: 2.5, dots: d.nodes.map((u) => [u, cost(u)]) },
  ], d.u);
}

function renderChatter() {
  const n = Number($("ch-n").value);
  const d = JSON.parse(chatter_p1(n, 2000));
  const u = d.u.concat([d.u[d.u.length - 1]]).map((v) => v / (2 * n));
  plot($("ch-plot"), [{ y: u, color: "#bbb", width: 1 }, { y: d.x, color: "#36c", width: 2 }], d.t);
  $("ch-cost").value = d.cost.toExponential(4);
  $("ch-ref").value = d.reference.toExponential(4);
}

function renderUnilateral() {
  const d = JSON.parse(unilateral(Number($("un-x0").value), Number($("un-h").value), 2, Number($("un-k").value)));
  plot($("un-plot"), [{ y: d.exact, color: "#999" }, { y: d.x, color: "#36c", width: 2 }], d.t);
  $("un-err").value = d.max_error.toExponential(3);
}

await init();
bind(["env-c", "env-w", "env-n"], renderEnvelope);
bind(["ch-n"], renderChatter);
bind(["un-x0", "un-h", "un-k"], renderUnilateral);
guard(renderEnvelope);
guard(renderChatter);
guard(renderUnilateral);
