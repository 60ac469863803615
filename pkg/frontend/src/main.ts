/** Browser bootstrap: wire the view to the page controls. */

import { ServiceClient, UPLOAD_CAP_BYTES } from "./api.js";
import { ChatView } from "./view.js";

const SERVICE_URL =
  new URLSearchParams(window.location.search).get("service") ?? "http://127.0.0.1:8000";

async function boot(): Promise<void> {
  const root = document.getElementById("chat") as HTMLElement;
  const input = document.getElementById("question") as HTMLInputElement;
  const sendButton = document.getElementById("send") as HTMLButtonElement;
  const fileInput = document.getElementById("upload") as HTMLInputElement;
  const status = document.getElementById("status") as HTMLElement;

  const client = new ServiceClient(SERVICE_URL);
  const view = new ChatView(root, client, document);
  const sessionId = await view.start();
  status.textContent = `session ${sessionId}`;

  async function send(): Promise<void> {
    const text = input.value.trim();
    if (!text || view.busy) return;
    input.value = "";
    sendButton.disabled = true;
    try {
      await view.send(text);
    } catch (err) {
      status.textContent = String(err);
    } finally {
      sendButton.disabled = false;
    }
  }

  sendButton.addEventListener("click", () => void send());
  input.addEventListener("keydown", (event) => {
    if (event.key === "Enter") void send();
  });

  fileInput.addEventListener("change", async () => {
    const file = fileInput.files?.[0];
    if (!file) return;
    if (file.size > UPLOAD_CAP_BYTES) {
      status.textContent = `file too large: ${file.size} bytes (cap ${UPLOAD_CAP_BYTES})`;
      return;
    }
    try {
      const summary = await client.uploadFile(sessionId, file.name, file);
      status.textContent = `uploaded ${summary.name} (${summary.kind})`;
    } catch (err) {
      status.textContent = String(err);
    }
  });
}

void boot();
