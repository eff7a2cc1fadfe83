import init, { boundTrajectories, densitySnapshot, ensembleThresholds } from "./pkg/ldpc_bounds_web.js";

const $ = (id) => document.getElementById(id);
const COLORS = { MS_UPPER: "#c0392b", SP_LOWER: "#2471a3", BEC_DE: "#7d3c98", DE_EDGE: "#1e8449", DE_NODE: "#b7950b" };
const FLOOR = 1e-16;

let curves = [];

function status(msg, isError = false) {
  $("status").textContent = msg;
  $("status").className = isError ? "err" : "";
}

function call(f, ...args) {
  try {
    return JSON.parse(f(...args));
  } catch (e) {
    status(String(e), true);
    return null;
  }
}

function inputs() {
  return [$("ensemble").value, $("channel").value.trim(), Number($("iters").value)];
}

// log10 axis from FLOOR to 1; nulls and values above 1 are clipped to the top
function drawTrajectories() {
  const cv = $("traj");
  const g = cv.getContext("2d");
  const W = cv.width, H = cv.height, L = 50, B = 25;
  g.clearRect(0, 0, W, H);
  const n = Math.max(1, ...curves.map((c) => c.values.length - 1));
  const lo = Math.log10(FLOOR);
  const x = (l) => L + ((W - L - 10) * l) / n;
  const y = (v) => {
    const t = v === null || v > 1 ? 0 : Math.log10(Math.max(v, FLOOR));
    return 10 + ((H - B - 10) * t) / lo;
  };
  g.strokeStyle = "#eee";
  g.fillStyle = "#555";
  g.font = "11px sans-serif";
  for (let e = 0; e >= lo; e -= 2) {
    const yy = y(10 ** e);
    g.beginPath(); g.moveTo(L, yy); g.lineTo(W - 10, yy); g.stroke();
    g.fillText(`1e${e}`, 5, yy + 4);
  }
  g.fillText("iteration", W / 2, H - 5);
  g.fillText(String(n), W - 30, H - 5);
  for (const c of curves) {
    g.strokeStyle = COLORS[c.kind] || "#000";
    g.lineWidth = 1.5;
    g.beginPath();
    c.values.forEach((v, l) => (l ? g.lineTo(x(l), y(v)) : g.moveTo(x(l), y(v))));
    g.stroke();
  }
  $("traj-key").innerHTML = curves
    .map((c) => `<span style="color:${COLORS[c.kind]}">&#9632; ${c.kind}</span>`)
    .join("");
}

function drawDensity(d, delta) {
  const cv = $("dens");
  const g = cv.getContext("2d");
  const W = cv.width, H = cv.height;
  g.clearRect(0, 0, W, H);
  if (!d.llr.length) {
    $("dens-note").textContent = `all mass on ±∞: +∞ ${d.pos_inf.toExponential(3)}, −∞ ${d.neg_inf.toExponential(3)}`;
    return;
  }
  const lo = Math.min(...d.llr), hi = Math.max(...d.llr);
  const span = Math.max(hi - lo, delta);
  const top = Math.max(...d.mass);
  const bw = Math.max(1, ((W - 20) * delta) / span);
  g.fillStyle = "#2471a3";
  d.llr.forEach((l, i) => {
    const h = ((H - 30) * d.mass[i]) / top;
    g.fillRect(10 + ((W - 20) * (l - lo)) / span, H - 20 - h, bw, h);
  });
  g.fillStyle = "#555";
  g.font = "11px sans-serif";
  g.fillText(lo.toFixed(2), 10, H - 5);
  g.fillText(hi.toFixed(2), W - 50, H - 5);
  if (lo < 0 && hi > 0) {
    const z = 10 + ((W - 20) * -lo) / span;
    g.strokeStyle = "#c0392b";
    g.beginPath(); g.moveTo(z, 0); g.lineTo(z, H - 20); g.stroke();
  }
  $("dens-note").textContent = `point masses: +∞ ${d.pos_inf.toExponential(3)}, −∞ ${d.neg_inf.toExponential(3)}`;
}

function runBounds() {
  const [ens, ch, iters] = inputs();
  const r = call(boundTrajectories, ens, ch, iters, $("rooted").checked);
  if (!r) return;
  curves = r.trajectories;
  drawTrajectories();
  status(`${r.ensemble}, rate ${r.rate.toFixed(4)}, ${r.channel}: D = ${r.bhattacharyya.toPrecision(5)}, P0 = ${r.p0.toPrecision(5)}`);
}

function runDe() {
  const [ens, ch, iters] = inputs();
  const delta = Number($("delta").value);
  status("running density evolution ...");
  // let the status line paint before the blocking call
  setTimeout(() => {
    const t0 = performance.now();
    const r = call(densitySnapshot, ens, ch, iters, delta);
    if (!r) return;
    curves = curves.filter((c) => !c.kind.startsWith("DE_"));
    curves.push({ kind: "DE_EDGE", values: r.edge }, { kind: "DE_NODE", values: r.node });
    drawTrajectories();
    drawDensity(r.density, r.delta);
    status(`density evolution took ${((performance.now() - t0) / 1000).toFixed(1)} s`);
  }, 10);
}

function runThresholds() {
  const r = call(ensembleThresholds, $("ensemble").value, Number($("tol").value));
  if (!r) return;
  const fmt = (t) => `${t.value.toFixed(6)}  [${t.lo.toFixed(6)}, ${t.hi.toFixed(6)}]`;
  $("thr").textContent =
    `${r.ensemble}, design rate ${r.rate.toFixed(4)}\n` +
    `union bound vanishes for D below   ${fmt(r.bhattacharyya)}\n` +
    `erasure decoding succeeds below    ${fmt(r.bec)}\n` +
    `erasure capacity limit             ${r.bec_capacity_limit.toFixed(6)}`;
}

await init();
$("run-bounds").onclick = runBounds;
$("run-de").onclick = runDe;
$("run-thr").onclick = runThresholds;
runBounds();
runThresholds();
