// Demo page logic. Expects the wasm-bindgen "web" target output in ./pkg
// (see the repository README for the two build commands).

import init, { SimSession } from "./pkg/cope_wasm.js";

const VIRIDIS = [
  [0.0, 68, 1, 84], [0.125, 72, 40, 120], [0.25, 62, 74, 137],
  [0.375, 49, 104, 142], [0.5, 38, 130, 142], [0.625, 31, 158, 137],
  [0.75, 53, 183, 121], [0.875, 109, 205, 89], [1.0, 253, 231, 37],
];

function viridis(t) {
  t = Math.min(1, Math.max(0, t));
  for (let i = 1; i < VIRIDIS.length; i++) {
    const [t1, r1, g1, b1] = VIRIDIS[i];
    if (t <= t1) {
      const [t0, r0, g0, b0] = VIRIDIS[i - 1];
      const w = t1 > t0 ? (t - t0) / (t1 - t0) : 0;
      return [r0 + w * (r1 - r0), g0 + w * (g1 - g0), b0 + w * (b1 - b0)];
    }
  }
  return VIRIDIS[VIRIDIS.length - 1].slice(1);
}

function drawHeatmap(canvas, values, nx, ny) {
  const ctx = canvas.getContext("2d");
  let lo = Infinity, hi = -Infinity;
  for (const v of values) { if (v < lo) lo = v; if (v > hi) hi = v; }
  if (!(hi > lo)) { lo = 0; hi = 1; }
  const img = ctx.createImageData(nx, ny);
  for (let iy = 0; iy < ny; iy++) {
    for (let ix = 0; ix < nx; ix++) {
      // row 0 of the grid is the bottom of the picture
      const v = values[(ny - 1 - iy) * nx + ix];
      const [r, g, b] = viridis((v - lo) / (hi - lo));
      const o = 4 * (iy * nx + ix);
      img.data[o] = r; img.data[o + 1] = g; img.data[o + 2] = b; img.data[o + 3] = 255;
    }
  }
  const off = new OffscreenCanvas(nx, ny);
  off.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
  return [lo, hi];
}

function drawPolylines(canvas, extent, paths, color, width) {
  const ctx = canvas.getContext("2d");
  const [x0, y0, x1, y1] = extent;
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  for (const path of paths) {
    if (path.length < 2) continue;
    ctx.beginPath();
    for (let i = 0; i < path.length; i++) {
      const px = ((path[i][0] - x0) / (x1 - x0)) * canvas.width;
      const py = (1 - (path[i][1] - y0) / (y1 - y0)) * canvas.height;
      if (i === 0) ctx.moveTo(px, py); else ctx.lineTo(px, py);
    }
    ctx.stroke();
  }
}

function drawHistogram(canvas, sorted, a) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (sorted.length === 0) return;
  const hi = Math.max(sorted[sorted.length - 1], a) * 1.05;
  const bins = 40;
  const counts = new Array(bins).fill(0);
  for (const v of sorted) counts[Math.min(bins - 1, Math.floor((v / hi) * bins))]++;
  const peak = Math.max(...counts);
  ctx.fillStyle = "#4a78b0";
  for (let b = 0; b < bins; b++) {
    const h = (counts[b] / peak) * (canvas.height - 18);
    ctx.fillRect((b / bins) * canvas.width, canvas.height - h, canvas.width / bins - 1, h);
  }
  ctx.strokeStyle = "crimson";
  ctx.lineWidth = 2;
  const px = (a / hi) * canvas.width;
  ctx.beginPath(); ctx.moveTo(px, 0); ctx.lineTo(px, canvas.height); ctx.stroke();
}

let session = null;

function simulate() {
  const status = document.getElementById("status");
  const kind = parseInt(document.getElementById("kind").value);
  const n = parseInt(document.getElementById("n").value);
  const reps = parseInt(document.getElementById("reps").value);
  const level = parseFloat(document.getElementById("level").value);
  const seed = parseInt(document.getElementById("seed").value) >>> 0;
  status.textContent = `simulating n=${n} fields and ${reps} bootstrap replicates…`;
  // let the status paint before the wasm call blocks
  setTimeout(() => {
    const t0 = performance.now();
    try {
      session = new SimSession(kind, n, reps, level, seed);
    } catch (e) {
      status.textContent = `error: ${e}`;
      return;
    }
    redraw();
    status.textContent = `done in ${(performance.now() - t0).toFixed(0)} ms, ` +
      `${session.boundary_points()} boundary points`;
    drawNoise();
  }, 10);
}

function redraw() {
  if (!session) return;
  const alpha = parseFloat(document.getElementById("alpha").value);
  document.getElementById("alphaval").textContent = alpha.toFixed(2);
  const canvas = document.getElementById("field");
  const nx = session.nx(), ny = session.ny();
  drawHeatmap(canvas, session.mu_hat(), nx, ny);
  const doc = JSON.parse(session.contours_json(alpha));
  const extent = session.extent();
  drawPolylines(canvas, extent, doc.truth, "#888", 1);
  drawPolylines(canvas, extent, doc.green, "green", 2);
  drawPolylines(canvas, extent, doc.red, "red", 2);
  drawPolylines(canvas, extent, doc.purple, "purple", 1.5);
  drawHistogram(document.getElementById("hist"), session.sup_sample(), doc.a);
  document.getElementById("ainfo").textContent =
    `a = ${doc.a.toFixed(3)} at 1−α = ${(1 - alpha).toFixed(2)}; ` +
    `sup sample of ${session.sup_sample().length}`;
}

function drawNoise() {
  if (!session) return;
  const pre = document.getElementById("presmooth").checked;
  const values = pre ? session.noise_prefield() : session.noise_example();
  drawHeatmap(document.getElementById("noise"), values, session.nx(), session.ny());
}

await init();
document.getElementById("status").textContent = "ready";
document.getElementById("resim").addEventListener("click", simulate);
document.getElementById("alpha").addEventListener("input", redraw);
document.getElementById("presmooth").addEventListener("change", drawNoise);
document.getElementById("n").addEventListener("input",
  () => document.getElementById("nval").textContent = document.getElementById("n").value);
["kind", "n", "reps", "level", "seed"].forEach(id =>
  document.getElementById(id).addEventListener("change", simulate));
simulate();
