import init, { john_ellipse, rescale_trajectory, bound_curve } from "./pkg/psdxc_web.js";

const $ = (id) => document.getElementById(id);

function show(el, text, isErr = false) {
  el.textContent = text;
  el.className = isErr ? "err" : "";
}

// Draws a polyline of [x, y] pairs into a canvas, with axes scaled to the data.
function plot(canvas, series, { logY = false, hline = null } = {}) {
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height, pad = 40;
  ctx.clearRect(0, 0, W, H);
  const all = series.flatMap((s) => s.points);
  if (hline !== null) all.push([all[0][0], hline]);
  const ty = (y) => (logY ? Math.log10(y) : y);
  const xs = all.map((p) => p[0]), ys = all.map((p) => ty(p[1]));
  let [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (x1 === x0) x1 = x0 + 1;
  if (y1 === y0) y1 = y0 + 1;
  const sx = (x) => pad + ((x - x0) / (x1 - x0)) * (W - 2 * pad);
  const sy = (y) => H - pad - ((ty(y) - y0) / (y1 - y0)) * (H - 2 * pad);

  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, W - 2 * pad, H - 2 * pad);
  ctx.fillStyle = "#555";
  ctx.fillText(x0.toString(), pad, H - pad + 14);
  ctx.fillText(x1.toString(), W - pad - 20, H - pad + 14);
  const fmt = (v) => (logY ? "1e" + v.toFixed(1) : v.toPrecision(3));
  ctx.fillText(fmt(y1), 2, pad + 4);
  ctx.fillText(fmt(y0), 2, H - pad);

  if (hline !== null) {
    ctx.setLineDash([4, 4]);
    ctx.strokeStyle = "#c60";
    ctx.beginPath();
    ctx.moveTo(pad, sy(hline));
    ctx.lineTo(W - pad, sy(hline));
    ctx.stroke();
    ctx.setLineDash([]);
  }
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    s.points.forEach(([x, y], i) => (i ? ctx.lineTo(sx(x), sy(y)) : ctx.moveTo(sx(x), sy(y))));
    ctx.stroke();
  }
}

// --- John ellipse ---

const johnPts = [];
const SCALE = 200;

function drawJohn() {
  const c = $("john"), ctx = c.getContext("2d");
  const cx = c.width / 2, cy = c.height / 2;
  const toPx = ([x, y]) => [cx + x * SCALE / 2, cy - y * SCALE / 2];
  ctx.clearRect(0, 0, c.width, c.height);
  ctx.strokeStyle = "#ddd";
  ctx.beginPath();
  ctx.moveTo(0, cy); ctx.lineTo(c.width, cy);
  ctx.moveTo(cx, 0); ctx.lineTo(cx, c.height);
  ctx.stroke();

  ctx.fillStyle = "#888";
  for (const p of johnPts) {
    for (const q of [p, [-p[0], -p[1]]]) {
      const [u, v] = toPx(q);
      ctx.fillRect(u - 2, v - 2, 4, 4);
    }
  }
  if (johnPts.length === 0) return show($("john-out"), "");

  let res;
  try {
    res = JSON.parse(john_ellipse(new Float64Array(johnPts.flat())));
  } catch (e) {
    return show($("john-out"), String(e.message ?? e), true);
  }
  // boundary is T·(unit sphere in R^k)
  ctx.strokeStyle = "#06c";
  ctx.beginPath();
  const N = 200;
  for (let i = 0; i <= N; i++) {
    const a = (2 * Math.PI * i) / N;
    const z = res.k === 1 ? [Math.cos(a)] : [Math.cos(a), Math.sin(a)];
    const x = res.t[0].reduce((s, t, j) => s + t * z[j], 0);
    const y = res.t[1].reduce((s, t, j) => s + t * z[j], 0);
    const [u, v] = toPx([x, y]);
    i ? ctx.lineTo(u, v) : ctx.moveTo(u, v);
  }
  ctx.stroke();

  const wmax = Math.max(...res.weights);
  ctx.fillStyle = "#c30";
  res.contacts.forEach((z, i) => {
    const r = 3 + 5 * (res.weights[i] / wmax);
    for (const q of [z, [-z[0], -z[1]]]) {
      const [u, v] = toPx(q);
      ctx.beginPath();
      ctx.arc(u, v, r, 0, 2 * Math.PI);
      ctx.fill();
    }
  });
  show(
    $("john-out"),
    `k = ${res.k}, ${res.contacts.length} contact points, identity residual ${res.identity_residual.toExponential(2)}`
  );
}

$("john").addEventListener("click", (ev) => {
  const c = ev.target, rect = c.getBoundingClientRect();
  const x = ((ev.clientX - rect.left - c.width / 2) * 2) / SCALE;
  const y = (-(ev.clientY - rect.top - c.height / 2) * 2) / SCALE;
  johnPts.push([x, y]);
  drawJohn();
});
$("john-clear").onclick = () => { johnPts.length = 0; drawJohn(); };
$("john-random").onclick = () => {
  johnPts.length = 0;
  for (let i = 0; i < 8; i++) johnPts.push([2 * Math.random() - 1, 2 * Math.random() - 1]);
  drawJohn();
};

// --- rescaling ---

function runRescale() {
  let res;
  try {
    res = JSON.parse(rescale_trajectory($("res-inst").value, Number($("res-n").value), BigInt($("res-seed").value)));
  } catch (e) {
    return show($("res-out"), String(e.message ?? e), true);
  }
  const pts = res.points.map((p) => [p.iteration, Math.sqrt(p.phi)]);
  plot($("res"), [{ points: pts, color: "#06c" }], { logY: true, hline: res.target });
  const last = pts[pts.length - 1][1];
  show(
    $("res-out"),
    `d = ${res.d}, Δ = ${res.delta}, target √(dΔ) = ${res.target.toFixed(4)}\n` +
      `√Φ: ${pts[0][1].toExponential(3)} → ${last.toFixed(4)} in ${pts.length - 1} iterations ` +
      `(${res.termination}, certificate ${res.certificate})`
  );
}
$("res-run").onclick = runRescale;

// --- bounds ---

function runBounds() {
  const f = $("bnd-formula").value;
  let res;
  try {
    res = JSON.parse(bound_curve(f, Number($("bnd-from").value), Number($("bnd-to").value), Number($("bnd-r").value)));
  } catch (e) {
    return show($("bnd-out"), String(e.message ?? e), true);
  }
  const series = [{ points: res.map((p) => [p.x, p.log2]), color: "#06c" }];
  if (res.length && res[0].other_log2 !== undefined) {
    series.push({ points: res.map((p) => [p.x, p.other_log2]), color: "#c30" });
  }
  plot($("bnd"), series);
  const a = res[0], b = res[res.length - 1];
  show($("bnd-out"), `log2 value: ${a.log2.toFixed(4)} at ${a.x}, ${b.log2.toFixed(4)} at ${b.x}`);
}
$("bnd-run").onclick = runBounds;

await init();
drawJohn();
runRescale();
runBounds();
