import { ApiClient } from "./api.js";
import { ProcessConsole } from "./console.js";

// ?server=http://host:port points the console at an engine; with no
// parameter it assumes the page is served by the engine itself.
const params = new URLSearchParams(window.location.search);
const base = params.get("server") ?? window.location.origin;

const client = new ApiClient(base);
const app = new ProcessConsole(client);
document.getElementById("app")!.appendChild(app.root);

app
  .init()
  .then(() => app.startWatching())
  .catch((err) => app.toast("error", `cannot reach ${base}: ${err}`));
