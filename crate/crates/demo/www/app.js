import init, { lambda_histogram, sampler_balance, mixup_probe } from "./pkg/longtail_demo.js";

const $ = (id) => document.getElementById(id);

function bars(canvas, values, color) {
  const ctx = canvas.getContext("2d");
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  const max = Math.max(1, ...values);
  const w = width / values.length;
  ctx.fillStyle = color;
  values.forEach((v, i) => {
    const h = (v / max) * (height - 4);
    ctx.fillRect(i * w + 1, height - h, Math.max(1, w - 2), h);
  });
}

function drawLambda() {
  const alpha = Number($("alpha").value);
  $("alpha-value").textContent = alpha.toFixed(2);
  bars($("lambda"), Array.from(lambda_histogram(alpha, 20000, 40, 7n)), "#3a6ea5");
}

function drawBalance() {
  try {
    const h = Array.from(sampler_balance(
      Number($("classes").value), Number($("head").value), Number($("tail").value),
      $("weighted").checked, 10, 1n));
    bars($("balance"), h, "#5b8c3a");
    $("balance-out").textContent = `head class ${h[0]} draws, tail class ${h[h.length - 1]} draws over 10 epochs`;
  } catch (e) {
    $("balance-out").textContent = String(e);
  }
}

let a = [80, 300];
let b = [320, 100];
let seed = 0n;

function drawProbe(mixed) {
  const ctx = $("probe").getContext("2d");
  ctx.clearRect(0, 0, 400, 400);
  ctx.strokeStyle = "#bbb";
  ctx.beginPath();
  ctx.moveTo(...a);
  ctx.lineTo(...b);
  ctx.stroke();
  const dot = (p, c, r = 6) => {
    ctx.fillStyle = c;
    ctx.beginPath();
    ctx.arc(p[0], p[1], r, 0, 2 * Math.PI);
    ctx.fill();
  };
  dot(a, "#c0392b");
  dot(b, "#2c3e50");
  if (mixed) {
    dot([mixed[1], mixed[2]], "#e67e22", 5);
    dot([mixed[3], mixed[4]], "#8e44ad", 5);
  }
}

function mix() {
  const out = mixup_probe(Number($("alpha").value), a[0], a[1], b[0], b[1], seed++);
  drawProbe(out);
  $("probe-out").textContent = `lambda = ${out[0].toFixed(3)}`;
}

$("probe").addEventListener("click", (e) => {
  const p = [e.offsetX, e.offsetY];
  if (e.shiftKey) b = p; else a = p;
  drawProbe(null);
});

await init();
$("alpha").addEventListener("input", drawLambda);
["classes", "head", "tail", "weighted"].forEach((id) => $(id).addEventListener("input", drawBalance));
$("mix").addEventListener("click", mix);
drawLambda();
drawBalance();
drawProbe(null);
