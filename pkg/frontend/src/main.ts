import { ApiClient } from "./api.js";
import { ConsoleApp } from "./ui.js";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app container");
void new ConsoleApp(new ApiClient(""), root).mount();
