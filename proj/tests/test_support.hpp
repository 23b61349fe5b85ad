#pragma once

// Generators and oracles shared by the unit and acceptance suites.

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "selectshare/bbs.hpp"
#include "selectshare/canonical.hpp"
#include "selectshare/credential.hpp"
#include "selectshare/issuer.hpp"
#include "selectshare/jose.hpp"
#include "selectshare/proxy.hpp"
#include "selectshare/storage.hpp"

namespace testsupport {

namespace jose = selectshare::jose;
using Json = nlohmann::json;
using Rng = std::mt19937_64;

inline std::size_t uniform(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}
inline bool coin(Rng& rng, double p = 0.5) { return std::bernoulli_distribution(p)(rng); }

// --- leaf oracle -------------------------------------------------------------------
//
// Written without the library: walks the document and lists every primitive and
// every empty non-root container, as a path string built with a different
// notation (/k:<key> and /i:<index>).

inline void oracle_walk(const Json& node, const std::string& path, bool root,
                        std::vector<std::pair<std::string, Json>>& out) {
  if (node.is_object()) {
    if (node.empty() && !root) out.emplace_back(path, Json::object());
    for (auto it = node.begin(); it != node.end(); ++it) oracle_walk(it.value(), path + "/k:" + it.key(), false, out);
  } else if (node.is_array()) {
    if (node.empty() && !root) out.emplace_back(path, Json::array());
    for (std::size_t i = 0; i < node.size(); ++i) oracle_walk(node[i], path + "/i:" + std::to_string(i), false, out);
  } else {
    out.emplace_back(path, node);
  }
}

/// Same notation for a library path.
inline std::string oracle_path(const selectshare::canonical::JsonPath& p) {
  std::string out;
  for (const auto& seg : p.segments()) {
    if (const auto* k = std::get_if<std::string>(&seg))
      out += "/k:" + *k;
    else
      out += "/i:" + std::to_string(std::get<std::size_t>(seg));
  }
  return out;
}

inline std::vector<std::pair<std::string, Json>> oracle_leaves(const Json& doc) {
  std::vector<std::pair<std::string, Json>> out;
  oracle_walk(doc, "", true, out);
  return out;
}

// --- schema-first random JSON ------------------------------------------------------
//
// A schema is drawn first (a tree of node kinds with fixed keys), then documents
// are instantiated from it with random primitive values and array lengths.

struct Schema {
  enum Kind { Null, Bool, Int, Float, String, Object, Array } kind = Null;
  std::vector<std::pair<std::string, std::shared_ptr<Schema>>> fields;  // Object
  std::shared_ptr<Schema> element;                                       // Array
};

inline std::string random_key(Rng& rng) {
  static const std::vector<std::string> tricky = {"a",   "b",  "key", "x y",   "q\"uote", "back\\slash", "[0]",
                                                  "a=b", "*",  "\xc3\xa9t\xc3\xa9", "deviceID", "values", "0", "field"};
  if (coin(rng, 0.6)) return tricky[uniform(rng, 0, tricky.size() - 1)];
  std::string k;
  std::size_t n = uniform(rng, 1, 8);
  for (std::size_t i = 0; i < n; ++i) k += static_cast<char>('a' + uniform(rng, 0, 25));
  return k;
}

inline std::shared_ptr<Schema> random_schema(Rng& rng, std::size_t depth) {
  auto s = std::make_shared<Schema>();
  std::size_t pick = depth == 0 ? uniform(rng, 0, 4) : uniform(rng, 0, 6);
  s->kind = static_cast<Schema::Kind>(pick);
  if (s->kind == Schema::Object) {
    std::size_t n = uniform(rng, 0, 4);
    std::set<std::string> used;
    for (std::size_t i = 0; i < n; ++i) {
      std::string k = random_key(rng);
      if (!used.insert(k).second) continue;
      s->fields.emplace_back(k, random_schema(rng, depth - 1));
    }
  } else if (s->kind == Schema::Array) {
    s->element = random_schema(rng, depth - 1);
  }
  return s;
}

inline std::shared_ptr<Schema> random_root_schema(Rng& rng, std::size_t depth) {
  std::shared_ptr<Schema> s;
  do s = random_schema(rng, depth);
  while (s->kind != Schema::Object && s->kind != Schema::Array);
  return s;
}

inline Json random_primitive(Rng& rng, Schema::Kind kind) {
  switch (kind) {
    case Schema::Null: return nullptr;
    case Schema::Bool: return coin(rng);
    case Schema::Int: {
      static const std::vector<std::int64_t> edges = {0, -1, 1, 9007199254740991LL, -9007199254740991LL,
                                                      INT64_MAX, INT64_MIN};
      if (coin(rng, 0.2)) return edges[uniform(rng, 0, edges.size() - 1)];
      return std::uniform_int_distribution<std::int64_t>(-100000, 100000)(rng);
    }
    case Schema::Float: {
      static const std::vector<double> edges = {0.0, -0.0, 0.1, 1e300, -2.5e-300, 1.0, 1e16, 123456789.125};
      if (coin(rng, 0.3)) return edges[uniform(rng, 0, edges.size() - 1)];
      return std::uniform_real_distribution<double>(-1e6, 1e6)(rng);
    }
    case Schema::String: {
      static const std::vector<std::string> samples = {"", "30C", "50", "temperature", "with \"quotes\"",
                                                       "tab\tnewline\n", "=", "[1]", "\xe2\x82\xac", "\\"};
      if (coin(rng, 0.5)) return samples[uniform(rng, 0, samples.size() - 1)];
      std::string s;
      std::size_t n = uniform(rng, 0, 12);
      for (std::size_t i = 0; i < n; ++i) s += static_cast<char>(uniform(rng, 0x20, 0x7e));
      return s;
    }
    default: return nullptr;
  }
}

inline Json instantiate(const Schema& s, Rng& rng) {
  switch (s.kind) {
    case Schema::Object: {
      Json o = Json::object();
      for (const auto& [k, child] : s.fields)
        if (coin(rng, 0.9)) o[k] = instantiate(*child, rng);
      return o;
    }
    case Schema::Array: {
      Json a = Json::array();
      std::size_t n = uniform(rng, 0, 4);
      for (std::size_t i = 0; i < n; ++i) a.push_back(instantiate(*s.element, rng));
      return a;
    }
    default: return random_primitive(rng, s.kind);
  }
}

inline Json random_document(Rng& rng, std::size_t depth = 4) { return instantiate(*random_root_schema(rng, depth), rng); }

/// A frame over `node` mixing reveals, constraints (some unsatisfiable) and "*".
inline Json random_frame(Rng& rng, const Json& node, std::size_t depth) {
  if (node.is_array() && !node.empty() && depth > 0) {
    return Json{{"*", random_frame(rng, node[uniform(rng, 0, node.size() - 1)], depth - 1)}};
  }
  if (node.is_object() && !node.empty() && depth > 0) {
    Json f = Json::object();
    for (const auto& [k, v] : node.items()) {
      if (k == "*" || !coin(rng, 0.6)) continue;  // a literal "*" key cannot be addressed
      if (v.is_primitive() && coin(rng, 0.3))
        f[k] = coin(rng, 0.7) ? v : Json("no-such-value");
      else if (coin(rng, 0.3))
        f[k] = "";
      else
        f[k] = random_frame(rng, v, depth - 1);
    }
    return f;
  }
  return "";
}

// --- measurement documents -----------------------------------------------------------

inline std::vector<std::string> field_pool() {
  return {"temperature", "humidity", "pressure", "co2", "noise", "light", "voltage", "pm25", "wind", "rain"};
}

/// A measurements document with a random subset of the field pool and 1-3 values per field.
inline Json random_measurement_doc(Rng& rng, const std::string& device_id) {
  auto pool = field_pool();
  std::shuffle(pool.begin(), pool.end(), rng);
  std::size_t n = uniform(rng, 1, pool.size());
  Json measurements = Json::array();
  for (std::size_t i = 0; i < n; ++i) {
    Json values = Json::array();
    std::size_t m = uniform(rng, 1, 3);
    for (std::size_t j = 0; j < m; ++j)
      values.push_back(Json{{"time", std::to_string(1658162155 + uniform(rng, 0, 100000))},
                            {"value", std::to_string(uniform(rng, 0, 999)) + (coin(rng) ? "C" : "")}});
    measurements.push_back(Json{{"field", pool[i]}, {"values", values}});
  }
  return Json{{"deviceID", device_id}, {"measurements", measurements}};
}

// --- in-process deployment -------------------------------------------------------------

/// Issuer, store and proxy wired together without HTTP; the proxy's status
/// fetcher reads straight from the issuer and counts fetches.
struct Stack {
  std::int64_t now = 1617559370;
  std::string owner = "owner-1";
  std::string issuer_uri = "https://issuer.com";
  jose::EcKey issuer_key = jose::EcKey::generate();
  std::unique_ptr<selectshare::issuer::IssuerService> issuer;
  selectshare::storage::DocumentStore store;
  selectshare::bbs::KeyPair signer = selectshare::bbs::keygen();
  std::unique_ptr<selectshare::proxy::Proxy> proxy;
  std::size_t status_fetches = 0;
  bool issuer_down = false;

  explicit Stack(std::int64_t lifetime = 864000) {
    namespace ss = selectshare;
    ss::issuer::IssuerConfig ic;
    ic.issuer_uri = issuer_uri;
    ic.vc_lifetime_seconds = lifetime;
    issuer = std::make_unique<ss::issuer::IssuerService>(ic, issuer_key);
    store.register_signer(signer.key_id, signer.public_key, owner);

    ss::proxy::ProxyConfig pc;
    pc.owner_id = owner;
    pc.trust[owner].push_back({issuer_uri, issuer_key.public_jwk(), ""});
    pc.public_base_url = "https://proxy.example";
    proxy = std::make_unique<ss::proxy::Proxy>(pc, std::make_shared<ss::proxy::StoreDocumentSource>(store),
                                               [this](const std::string&) -> Json {
                                                 ++status_fetches;
                                                 if (issuer_down) throw std::runtime_error("issuer down");
                                                 return issuer->status_list_json();
                                               });
  }

  selectshare::storage::SignedDocument upload(const Json& doc) {
    return store.put(selectshare::storage::sign_document(doc, signer));
  }

  struct Client {
    std::string vc;
    jose::EcKey key;
    selectshare::credential::CapabilityVC claims;
  };

  Client enroll(const std::string& client_id, const selectshare::credential::Capabilities& policy) {
    issuer->put_client(client_id, client_id + "-secret", owner);
    issuer->put_policy(client_id, policy);
    Client c{"", jose::EcKey::generate(), {}};
    selectshare::issuer::TokenRequest req{"client_credentials", client_id, client_id + "-secret",
                                          selectshare::issuer::make_authorization_details(c.key, client_id, now)};
    auto tok = issuer->issue_token(req, now);
    c.vc = tok.access_token;
    c.claims = tok.vc;
    return c;
  }

  selectshare::proxy::Outcome request(const Client& c, const std::string& device, std::vector<std::string> fields) {
    selectshare::proxy::DataRequest r;
    r.device_id = device;
    r.fields = std::move(fields);
    r.authorization = "DPoP " + c.vc;
    r.dpop = selectshare::credential::create_dpop(c.key, "POST", proxy->data_uri(device), now);
    return proxy->handle(r, now);
  }
};

}  // namespace testsupport
