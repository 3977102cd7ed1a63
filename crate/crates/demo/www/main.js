// Build first: wasm-pack build crates/demo --target web --out-dir www/pkg
import init, { design_beam, sampling_psf, tradeoff } from "./pkg/jcr_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function axes(ctx, w, h, pad, xr, yr, xlabel, ylabel) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad / 2, w - 1.5 * pad, h - 1.5 * pad);
  ctx.fillStyle = "#444";
  ctx.font = "12px sans-serif";
  ctx.fillText(xlabel, w / 2 - 30, h - 6);
  ctx.save();
  ctx.translate(12, h / 2 + 30);
  ctx.rotate(-Math.PI / 2);
  ctx.fillText(ylabel, 0, 0);
  ctx.restore();
  ctx.fillText(xr[0].toFixed(2), pad, h - pad + 14);
  ctx.fillText(xr[1].toFixed(2), w - pad, h - pad + 14);
  ctx.fillText(yr[1].toFixed(1), 2, pad / 2 + 10);
  ctx.fillText(yr[0].toFixed(1), 2, h - pad);
  const sx = (x) => pad + ((x - xr[0]) / (xr[1] - xr[0])) * (w - 1.5 * pad);
  const sy = (y) => h - pad - ((y - yr[0]) / (yr[1] - yr[0])) * (h - 1.5 * pad);
  return [sx, sy];
}

function showError(id, e) {
  $(id).innerHTML = `<span class="err">${e}</span>`;
}

function drawBeam() {
  $("bf-delta-v").textContent = num("bf-delta").toFixed(2);
  const c = $("bf-canvas"), ctx = c.getContext("2d");
  let v;
  try {
    v = design_beam(num("bf-n"), num("bf-delta"), num("bf-bits"), 100, num("bf-shift"), 801);
  } catch (e) {
    return showError("bf-info", e);
  }
  const s = v.sin_theta, g = v.gain_db;
  const top = Math.max(...g);
  const [sx, sy] = axes(ctx, c.width, c.height, 40, [-1, 1], [-40, Math.ceil(top)], "sin θ", "gain (dB)");
  ctx.strokeStyle = "#1f5fbf";
  ctx.beginPath();
  s.forEach((x, i) => (i ? ctx.lineTo(sx(x), sy(g[i])) : ctx.moveTo(sx(x), sy(g[i]))));
  ctx.stroke();
  const m = v.dft_magnitudes, ideal = v.ideal_magnitudes;
  $("bf-info").textContent =
    `profile error ${v.error.toFixed(4)}; communication bin |Λ0|² = ${(m[0] * m[0]).toFixed(3)} (target ${(ideal[0] * ideal[0]).toFixed(3)})`;
  v.free();
}

function drawPsf() {
  const c = $("psf-canvas"), ctx = c.getContext("2d");
  let v;
  try {
    v = sampling_psf(num("psf-n"), $("psf-random").checked, num("psf-seed"));
  } catch (e) {
    return showError("psf-info", e);
  }
  const n = v.rows, mags = v.magnitudes, cell = c.width / n;
  ctx.clearRect(0, 0, c.width, c.height);
  for (let p = 0; p < n; p++) {
    for (let q = 0; q < n; q++) {
      const shade = Math.round(255 * (1 - Math.min(1, mags[p * n + q])));
      ctx.fillStyle = `rgb(${shade},${shade},255)`;
      ctx.fillRect(q * cell, p * cell, Math.ceil(cell), Math.ceil(cell));
    }
  }
  $("psf-info").textContent =
    `coherence μ = ${v.coherence.toFixed(4)} (1/√N = ${(1 / Math.sqrt(n)).toFixed(4)}); shifts ${Array.from(v.shifts).join(" ")}`;
  v.free();
}

function drawTradeoff() {
  $("to-wc-v").textContent = num("to-wc").toFixed(2);
  const c = $("to-canvas"), ctx = c.getContext("2d");
  let v;
  try {
    v = tradeoff(num("to-n"), num("to-k"), num("to-snr"), num("to-zc"), num("to-wc"), $("to-ideal").checked);
  } catch (e) {
    return showError("to-info", e);
  }
  const x = v.log_nmse.map((a) => 10 * a), y = v.log_dmse, hull = v.hull;
  const pad = (lo, hi) => [lo - 0.05 * (hi - lo), hi + 0.05 * (hi - lo)];
  const xr = pad(Math.min(...x), Math.max(...x)), yr = pad(Math.min(...y), Math.max(...y));
  const [sx, sy] = axes(ctx, c.width, c.height, 40, xr, yr, "radar NMSE (dB)", "log2 DMSE");
  ctx.fillStyle = "#bbb";
  x.forEach((a, i) => ctx.fillRect(sx(a) - 1.5, sy(y[i]) - 1.5, 3, 3));
  ctx.strokeStyle = "#c03";
  ctx.beginPath();
  hull.forEach((i, k) => (k ? ctx.lineTo(sx(x[i]), sy(y[i])) : ctx.moveTo(sx(x[i]), sy(y[i]))));
  ctx.stroke();
  const j = v.chosen;
  ctx.fillStyle = "#070";
  ctx.beginPath();
  ctx.arc(sx(x[j]), sy(y[j]), 6, 0, 2 * Math.PI);
  ctx.fill();
  $("to-info").textContent =
    `optimum ρ = ${v.chosen_rho}, δ = ${v.chosen_delta}; NMSE ${x[j].toFixed(2)} dB, log2 DMSE ${y[j].toFixed(3)}`;
  v.free();
}

await init();
for (const id of ["bf-n", "bf-delta", "bf-bits", "bf-shift"]) $(id).addEventListener("input", drawBeam);
for (const id of ["psf-n", "psf-random", "psf-seed"]) $(id).addEventListener("input", drawPsf);
for (const id of ["to-n", "to-k", "to-snr", "to-zc", "to-wc", "to-ideal"]) $(id).addEventListener("input", drawTradeoff);
drawBeam();
drawPsf();
drawTradeoff();
