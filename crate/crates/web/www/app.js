import init, { field_slice, cluster_summary, decay_report, basis_report } from "./pkg/hyperperc_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const params = () => [num("seed") >>> 0, num("p12"), num("p13"), num("p23")];

function drawSlice() {
  const half = num("half");
  const level = $("level");
  level.min = -half;
  level.max = half;
  $("levelOut").textContent = level.value;
  const [seed, p12, p13, p23] = params();
  const cells = field_slice(seed, p12, p13, p23, half, Number(level.value));
  const side = 2 * half + 1;
  const canvas = $("slice");
  const ctx = canvas.getContext("2d");
  const px = canvas.width / side;
  const colors = ["#111", "#ccc", "#d22"];
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  for (let r = 0; r < side; r++) {
    for (let c = 0; c < side; c++) {
      ctx.fillStyle = colors[cells[r * side + c]] ?? "#fff";
      ctx.fillRect(c * px, r * px, Math.ceil(px), Math.ceil(px));
    }
  }
  ctx.strokeStyle = "#06c";
  ctx.strokeRect(half * px, half * px, px, px);
  $("clusterOut").textContent = JSON.stringify(JSON.parse(cluster_summary(seed, p12, p13, p23, half)), null, 2);
}

function drawDecay(curve) {
  const canvas = $("decay");
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 36;
  ctx.clearRect(0, 0, w, h);
  const pts = curve.entries.filter((e) => e.p_hat > 0);
  if (pts.length === 0) return;
  const xs = pts.map((e) => Math.log(e.k));
  const ys = pts.map((e) => Math.log(e.p_hat));
  const lo = pts.map((e) => Math.log(Math.max(e.ci_lo, 1e-12)));
  const hi = pts.map((e) => Math.log(e.ci_hi));
  const x0 = Math.min(...xs), x1 = Math.max(...xs) || 1;
  const y0 = Math.min(...lo), y1 = Math.max(...hi, 0);
  const sx = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const sy = (y) => h - pad - ((y - y0) / (y1 - y0 || 1)) * (h - 2 * pad);
  ctx.strokeStyle = "#888";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#222";
  ctx.fillText("log K", w / 2, h - 8);
  ctx.fillText("log P", 4, pad - 8);
  ctx.strokeStyle = "#06c";
  for (let i = 0; i < pts.length; i++) {
    ctx.beginPath();
    ctx.moveTo(sx(xs[i]), sy(lo[i]));
    ctx.lineTo(sx(xs[i]), sy(hi[i]));
    ctx.stroke();
    ctx.beginPath();
    ctx.arc(sx(xs[i]), sy(ys[i]), 3, 0, 2 * Math.PI);
    ctx.fill();
  }
}

function runDecay() {
  const [seed, p12, p13, p23] = params();
  $("decayOut").textContent = "running...";
  // Let the status text paint before the synchronous run.
  setTimeout(() => {
    const r = JSON.parse(decay_report(seed, p12, p13, p23, num("trials"), num("kmax"), $("truncated").checked));
    if (r.error) {
      $("decayOut").textContent = r.error;
      return;
    }
    drawDecay(r.curve);
    const s = r.selection;
    const rows = r.curve.entries.map((e) => `K=${e.k}  ${e.successes}/${e.trials}  [${e.ci_lo.toFixed(5)}, ${e.ci_hi.toFixed(5)}]`);
    const fit = (f) => (f ? `exponent ${f.exponent.toFixed(3)}, AIC ${f.aic.toFixed(1)}` : "n/a");
    $("decayOut").textContent = [
      `verdict: ${s.verdict}`,
      s.reason,
      `power law: ${fit(s.power_law)}`,
      `exponential: ${fit(s.exponential)}`,
      "",
      ...rows,
    ].join("\n");
  }, 10);
}

function runBasis() {
  $("basisOut").textContent = JSON.stringify(JSON.parse(basis_report(num("basisN"))), null, 2);
}

await init();
$("drawSlice").onclick = drawSlice;
$("level").oninput = drawSlice;
$("runDecay").onclick = runDecay;
$("runBasis").onclick = runBasis;
drawSlice();
runBasis();
