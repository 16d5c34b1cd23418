const log = document.getElementById("log");
const status = document.getElementById("status");
const ws = new WebSocket(`ws://${location.host}/ws`);

function line(text) {
  log.textContent += text + "\n";
  log.scrollTop = log.scrollHeight;
}

ws.onopen = () => { status.textContent = "connected"; };
ws.onclose = () => { status.textContent = "disconnected"; };
ws.onmessage = (m) => {
  const e = JSON.parse(m.data);
  switch (e.type) {
    case "idle": status.textContent = "idle"; break;
    case "started": status.textContent = `running ${e.benchmark_id} ${e.trial_label}`; break;
    case "message": { const msg = e.message; line(`--- ${msg.role} (${msg.phase}${msg.feedback_level ? " " + msg.feedback_level : ""})\n${msg.content}`); break; }
    case "verdict": line(`=== ${e.verdict.phase}: ${e.verdict.passed ? "pass" : "fail"}\n${e.verdict.feedback_text}`); break;
    case "escalation_request": status.textContent = `waiting for ${e.level} feedback`; break;
    case "terminal": line(`*** outcome ${e.outcome.terminal}, ${e.outcome.user_messages} messages`); break;
    case "error": line(`!!! ${e.message}`); break;
    default: break;
  }
};

const send = (obj) => ws.send(JSON.stringify(obj));
document.getElementById("start").onclick = () =>
  send({ type: "start", benchmark: document.getElementById("benchmark").value, trial: document.getElementById("trial").value });
document.getElementById("send").onclick = () => {
  const box = document.getElementById("feedback");
  send({ type: "feedback", text: box.value });
  box.value = "";
};
document.getElementById("abort").onclick = () => send({ type: "abort" });
document.getElementById("abort-hdl").onclick = () => send({ type: "abort", wrote_hdl: true });
