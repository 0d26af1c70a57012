// Shell: tab navigation over the four screens plus the service-down banner.

import { ApiClient } from "./api.js";
import { Store } from "./state.js";
import { AppConsole } from "./views/app_console.js";
import { BenchDashboard } from "./views/bench_dashboard.js";
import { ConfigExplorer } from "./views/config_explorer.js";
import { SearchConsole } from "./views/search_console.js";

export interface MountedUi {
  store: Store;
  search: SearchConsole;
  stopPolling: () => void;
}

export function mountUi(doc: Document, mount: HTMLElement, apiBase: string): MountedUi {
  const api = new ApiClient(apiBase);
  const store = new Store(api);

  const banner = doc.createElement("div");
  banner.id = "service-banner";
  banner.className = "banner hidden";
  const bannerText = doc.createElement("span");
  bannerText.textContent = "service unreachable";
  const retry = doc.createElement("button");
  retry.type = "button";
  retry.textContent = "retry";
  retry.addEventListener("click", () => {
    void store.refresh();
  });
  banner.append(bannerText, retry);
  mount.appendChild(banner);

  const nav = doc.createElement("nav");
  const main = doc.createElement("main");
  mount.append(nav, main);

  const explorer = new ConfigExplorer(doc, store);
  const console_ = new AppConsole(doc, store);
  const search = new SearchConsole(doc, store);
  const bench = new BenchDashboard(doc, store);

  const screens: [string, HTMLElement][] = [
    ["Config Explorer", explorer.root],
    ["App Console", console_.root],
    ["Search Console", search.root],
    ["Bench Dashboard", bench.root],
  ];
  for (const [label, section] of screens) {
    main.appendChild(section);
    const button = doc.createElement("button");
    button.type = "button";
    button.textContent = label;
    button.addEventListener("click", () => {
      for (const [, other] of screens) other.classList.add("hidden");
      section.classList.remove("hidden");
    });
    nav.appendChild(button);
  }
  for (const [, section] of screens.slice(1)) section.classList.add("hidden");

  store.subscribe((state) => {
    banner.classList.toggle("hidden", !state.serviceDown);
  });

  void store.refresh();
  const stopPolling = store.startPolling();
  return { store, search, stopPolling };
}
