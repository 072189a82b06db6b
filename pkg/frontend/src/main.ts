import { ApiClient } from "./api.js";
import { DashboardController } from "./controller.js";

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app root element");
}
void new DashboardController(root, new ApiClient()).init();
