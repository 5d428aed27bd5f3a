import { Reader } from "./reader.js";

async function boot(): Promise<void> {
  const page = document.getElementById("page")!;
  const sidebar = document.getElementById("sidebar")!;
  const statusBar = document.getElementById("status-bar")!;
  const picker = document.getElementById("doc-picker") as HTMLSelectElement;

  const wsUrl = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/ws`;
  const reader = new Reader({ page, sidebar, statusBar }, wsUrl,
                            (url) => new WebSocket(url));
  reader.connect();

  const docs: { doc_ids: string[] } = await (await fetch("/documents")).json();
  for (const id of docs.doc_ids) {
    const opt = document.createElement("option");
    opt.value = id;
    opt.textContent = id;
    picker.appendChild(opt);
  }

  async function open(docId: string): Promise<void> {
    const res = await fetch(`/layout/${docId}`);
    if (!res.ok) {
      statusBar.textContent = `error: could not load layout for ${docId}`;
      statusBar.classList.add("error");
      return;
    }
    reader.openDocument(await res.json(), page.clientWidth);
  }

  picker.addEventListener("change", () => void open(picker.value));
  if (docs.doc_ids.length > 0) {
    picker.value = docs.doc_ids[0]!;
    await open(picker.value);
  }

  page.addEventListener("mousemove", (ev: MouseEvent) => {
    const rect = page.getBoundingClientRect();
    reader.pointerMoved(ev.clientX - rect.left, ev.clientY - rect.top);
  });

  const frame = (): void => {
    reader.tick();
    requestAnimationFrame(frame);
  };
  requestAnimationFrame(frame);
}

void boot();
