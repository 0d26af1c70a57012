import { mountUi } from "./app.js";

const params = new URLSearchParams(window.location.search);
const apiBase = params.get("api") ?? "";
const mount = document.getElementById("app");
if (!mount) throw new Error("missing #app mount point");
mountUi(document, mount, apiBase);
