import init, { psi_curve, lyapunov_curve, decay_curve } from "./pkg/levy_coupling_web.js";

const num = (id) => Number(document.getElementById(id).value);
const caption = document.getElementById("caption");
const canvas = document.getElementById("plot");

// Line plot; log scale drops non-positive values.
function plot(xs, ys, { logX = false, logY = false, ylabel = "" } = {}) {
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height, pad = 48;
  const fx = logX ? Math.log10 : (v) => v;
  const fy = logY ? Math.log10 : (v) => v;
  const pts = [];
  for (let i = 0; i < xs.length; i++) {
    if ((logX && xs[i] <= 0) || (logY && ys[i] <= 0) || !Number.isFinite(ys[i])) continue;
    pts.push([fx(xs[i]), fy(ys[i])]);
  }
  ctx.clearRect(0, 0, W, H);
  if (pts.length < 2) return;
  const [x0, x1] = [Math.min(...pts.map((p) => p[0])), Math.max(...pts.map((p) => p[0]))];
  let [y0, y1] = [Math.min(...pts.map((p) => p[1])), Math.max(...pts.map((p) => p[1]))];
  if (y1 - y0 < 1e-12) { y0 -= 0.5; y1 += 0.5; }
  const sx = (v) => pad + ((v - x0) / (x1 - x0)) * (W - 2 * pad);
  const sy = (v) => H - pad - ((v - y0) / (y1 - y0)) * (H - 2 * pad);
  ctx.strokeStyle = "#888";
  ctx.strokeRect(pad, pad, W - 2 * pad, H - 2 * pad);
  ctx.fillStyle = "#333";
  ctx.font = "12px sans-serif";
  const tick = (v, log) => (log ? `1e${v.toFixed(1)}` : v.toPrecision(3));
  ctx.fillText(tick(y1, logY), 2, pad + 4);
  ctx.fillText(tick(y0, logY), 2, H - pad);
  ctx.fillText(tick(x0, logX), pad, H - pad + 16);
  ctx.fillText(tick(x1, logX), W - pad - 30, H - pad + 16);
  ctx.fillText(ylabel, pad + 4, pad - 8);
  ctx.strokeStyle = "#1f5fbf";
  ctx.lineWidth = 2;
  ctx.beginPath();
  pts.forEach(([x, y], i) => (i ? ctx.lineTo(sx(x), sy(y)) : ctx.moveTo(sx(x), sy(y))));
  ctx.stroke();
}

function run(button, action) {
  document.getElementById(button).addEventListener("click", () => {
    caption.className = "";
    caption.textContent = "working...";
    // Let the status text paint before the blocking call.
    setTimeout(() => {
      try {
        action();
      } catch (e) {
        caption.className = "error";
        caption.textContent = e.message ?? String(e);
      }
    }, 10);
  });
}

await init();

run("psi", () => {
  const c = psi_curve(num("d"), num("alpha"), num("k1"), num("k2"), num("l0"), num("theta"), 400);
  plot(c.x, c.y, { logY: true, ylabel: "psi(r), log scale" });
  caption.textContent = c.caption;
});

run("lyapunov", () => {
  const c = lyapunov_curve(num("d"), num("alpha"), num("k1"), num("k2"), num("l0"), num("theta"), 60);
  plot(c.x, c.y, { logX: true, logY: true, ylabel: "-Lpsi/psi against r" });
  caption.textContent = c.caption;
});

run("decay", () => {
  const c = decay_curve(num("alpha"), num("beta"), num("r0"), num("paths"), num("horizon"), BigInt(num("seed")));
  plot(c.x, c.y, { ylabel: "mean psi(|X_t - Y_t|) against t" });
  caption.textContent = c.caption;
});
