#include "selectshare/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <random>
#include <thread>

#include <httplib.h>

#include "selectshare/canonical.hpp"
#include "selectshare/credential.hpp"
#include "selectshare/error.hpp"
#include "selectshare/framing.hpp"
#include "selectshare/issuer.hpp"
#include "selectshare/proxy.hpp"
#include "selectshare/storage.hpp"

namespace selectshare::harness {

Json gen_doc(std::size_t n_fields, std::uint64_t seed, const std::string& device_id) {
  if (n_fields == 0) throw Error(Errc::MalformedInput, "n_fields must be at least 1");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> reading(0, 9999);
  std::uniform_int_distribution<std::int64_t> jitter(0, 3600);
  const std::int64_t base = 1658162155;
  Json measurements = Json::array();
  for (std::size_t i = 0; i < n_fields; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "field-%03zu", i);
    measurements.push_back(Json{{"field", name},
                                {"values", Json::array({Json{{"time", std::to_string(base + jitter(rng))},
                                                             {"value", std::to_string(reading(rng))}}})}});
  }
  return Json{{"deviceID", device_id}, {"measurements", measurements}};
}

std::vector<std::string> field_names(const Json& doc) {
  std::vector<std::string> out;
  for (const auto& m : doc.at("measurements")) out.push_back(m.at("field").get<std::string>());
  return out;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

// CPU time of the calling thread, so time lost to other tenants is not counted.
double thread_cpu_ms() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) * 1e3 + static_cast<double>(ts.tv_nsec) / 1e6;
}

}  // namespace

std::vector<BenchRecord> run_bench(const Json& doc, const bbs::KeyPair& key,
                                   const std::vector<std::size_t>& revealed_counts, std::size_t repetitions) {
  if (repetitions == 0) throw Error(Errc::MalformedInput, "repetitions must be at least 1");
  auto canon = canonical::canonicalize(doc);
  std::vector<Bytes> messages;
  for (const auto& m : canon.messages) messages.push_back(to_bytes(m.encoding));
  auto sig = bbs::sign(key.secret_key, key.public_key, messages);
  auto names = field_names(doc);

  struct Case {
    std::vector<std::size_t> indices;
    std::map<std::size_t, Bytes> revealed;
    std::vector<double> prove, verify, reference;
    std::size_t proof_bytes = 0;
  };
  std::vector<Case> cases(revealed_counts.size());
  for (std::size_t c = 0; c < revealed_counts.size(); ++c) {
    std::size_t k = revealed_counts[c];
    if (k == 0 || k > names.size()) throw Error(Errc::MalformedInput, "revealed count out of range");
    std::vector<std::string> fields(names.begin(), names.begin() + static_cast<std::ptrdiff_t>(k));
    auto sub = framing::apply_frame(doc, framing::frame_from_fields(fields));
    cases[c].indices = framing::reveal_indices(canon, sub);
    for (auto i : cases[c].indices) cases[c].revealed.emplace(i, messages[i]);
  }

  // Fixed workload timed on both sides of every sample to track how fast the host is running right now.
  const std::vector<Bytes> ref_messages{to_bytes("reference")};
  const auto ref_sig = bbs::sign(key.secret_key, key.public_key, ref_messages);
  auto reference = [&] {
    double t = thread_cpu_ms();
    if (!bbs::verify(key.public_key, ref_messages, ref_sig)) throw Error(Errc::InvalidSignature, "reference verify failed");
    return thread_cpu_ms() - t;
  };

  Bytes nonce = random_bytes(32);
  for (std::size_t rep = 0; rep < repetitions; ++rep) {
    for (std::size_t j = 0; j < cases.size(); ++j) {
      Case& cs = cases[(j + rep) % cases.size()];
      double ref_before = reference();
      double t0 = thread_cpu_ms();
      auto proof = bbs::derive_proof(key.public_key, sig, messages, cs.indices, nonce);
      double t1 = thread_cpu_ms();
      bool ok = bbs::verify_proof(key.public_key, proof, cs.revealed, nonce);
      double t2 = thread_cpu_ms();
      cs.prove.push_back(t1 - t0);
      cs.verify.push_back(t2 - t1);
      cs.reference.push_back((ref_before + reference()) / 2);
      if (!ok) throw Error(Errc::InvalidSignature, "benchmark proof failed to verify");
      cs.proof_bytes = proof.bytes.size();
    }
  }

  std::vector<double> all_refs;
  for (const auto& cs : cases) all_refs.insert(all_refs.end(), cs.reference.begin(), cs.reference.end());
  const double typical_ref = median(all_refs);

  std::vector<BenchRecord> out;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const Case& cs = cases[c];
    std::vector<double> prove_adj, verify_adj;
    for (std::size_t r = 0; r < cs.prove.size(); ++r) {
      double scale = typical_ref / cs.reference[r];
      prove_adj.push_back(cs.prove[r] * scale);
      verify_adj.push_back(cs.verify[r] * scale);
    }
    out.push_back({revealed_counts[c], median(cs.prove), median(cs.verify), cs.proof_bytes, median(prove_adj),
                   median(verify_adj)});
  }
  return out;
}

void write_csv(std::ostream& out, const std::vector<BenchRecord>& records) {
  out << "revealed_count,prove_ms,verify_ms,proof_bytes,prove_adj_ms,verify_adj_ms\n";
  for (const auto& r : records) {
    char line[160];
    std::snprintf(line, sizeof line, "%zu,%.4f,%.4f,%zu,%.4f,%.4f\n", r.revealed_count, r.prove_ms, r.verify_ms,
                  r.proof_bytes, r.prove_adj_ms, r.verify_adj_ms);
    out << line;
  }
}

Json to_series(const std::vector<BenchRecord>& records) {
  Json j{{"revealed", Json::array()},    {"prove_ms", Json::array()},     {"verify_ms", Json::array()},
         {"proof_bytes", Json::array()}, {"prove_adj_ms", Json::array()}, {"verify_adj_ms", Json::array()}};
  for (const auto& r : records) {
    j["revealed"].push_back(r.revealed_count);
    j["prove_ms"].push_back(r.prove_ms);
    j["verify_ms"].push_back(r.verify_ms);
    j["proof_bytes"].push_back(r.proof_bytes);
    j["prove_adj_ms"].push_back(r.prove_adj_ms);
    j["verify_adj_ms"].push_back(r.verify_adj_ms);
  }
  return j;
}

std::vector<transcoder::RawReading> demo_readings() {
  return {{"monitor-1", "temperature", "30C", 1658162155}, {"monitor-1", "humidity", "50", 1658162155}};
}

Json demo_expected_display() {
  return Json::parse(R"({"measurements":[{"field":"temperature","values":[{"value":"30C"}]}]})");
}

// --- end to end ------------------------------------------------------------------

E2EOptions E2EOptions::from_json(const Json& j) {
  E2EOptions o;
  if (!j.is_object()) throw Error(Errc::Config, "e2e config must be an object");
  try {
    o.owner_id = j.value("owner_id", o.owner_id);
    o.device_id = j.value("device_id", o.device_id);
    o.client_id = j.value("client_id", o.client_id);
    o.client_secret = j.value("client_secret", o.client_secret);
    o.issuer_uri = j.value("issuer_uri", o.issuer_uri);
    o.start_time = j.value("start_time", o.start_time);
    o.vc_lifetime_seconds = j.value("vc_lifetime_seconds", o.vc_lifetime_seconds);
    o.host = j.value("host", o.host);
  } catch (const Json::exception& e) {
    throw Error(Errc::Config, e.what());
  }
  return o;
}

bool E2EReport::ok() const {
  return !steps.empty() && std::all_of(steps.begin(), steps.end(), [](const E2EStep& s) { return s.ok; });
}

const E2EStep* E2EReport::find(const std::string& name) const {
  for (const auto& s : steps)
    if (s.name == name) return &s;
  return nullptr;
}

Json E2EReport::to_json() const {
  Json arr = Json::array();
  for (const auto& s : steps) arr.push_back(Json{{"step", s.name}, {"ok", s.ok}, {"detail", s.detail}});
  return Json{{"ok", ok()}, {"elapsed_ms", elapsed_ms}, {"steps", arr}};
}

namespace {

// An httplib server on an ephemeral loopback port, served from a thread.
class ServiceHost {
 public:
  explicit ServiceHost(const std::string& host) : host_(host) {
    port_ = server_.bind_to_any_port(host);
    if (port_ <= 0) throw Error(Errc::Io, "cannot bind a port on " + host);
  }
  ~ServiceHost() { stop(); }
  ServiceHost(const ServiceHost&) = delete;
  ServiceHost& operator=(const ServiceHost&) = delete;

  httplib::Server& server() { return server_; }
  std::string base_url() const { return "http://" + host_ + ":" + std::to_string(port_); }
  void start() {
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

 private:
  std::string host_;
  int port_ = 0;
  httplib::Server server_;
  std::thread thread_;
};

struct Reply {
  int status = 0;
  Json body;
};

Reply to_reply(const httplib::Result& res) {
  if (!res) throw Error(Errc::Io, "request failed: " + httplib::to_string(res.error()));
  return Reply{res->status, Json::parse(res->body, nullptr, false)};
}

Reply post_json(const std::string& base, const std::string& path, const Json& body, const httplib::Headers& headers = {}) {
  httplib::Client c(base);
  return to_reply(c.Post(path, headers, body.dump(), "application/json"));
}

Reply get_json(const std::string& base, const std::string& path) {
  httplib::Client c(base);
  return to_reply(c.Get(path));
}

std::string describe(const Reply& r) {
  std::string reason = r.body.is_object() ? r.body.value("reason", r.body.value("error", "")) : "";
  return std::to_string(r.status) + (reason.empty() ? "" : " " + reason);
}

}  // namespace

E2EReport run_e2e(const E2EOptions& opt) {
  const auto t_start = std::chrono::steady_clock::now();
  E2EReport report;
  std::atomic<std::int64_t> now{opt.start_time};
  auto clock = [&now] { return now.load(); };
  const std::string admin_key = base64url_encode(random_bytes(16));
  const std::string upload_key = base64url_encode(random_bytes(16));
  const std::string read_key = base64url_encode(random_bytes(16));

  auto step = [&report](const std::string& name, auto&& body) -> bool {
    E2EStep s{name, false, ""};
    try {
      s.detail = body();
      s.ok = true;
    } catch (const std::exception& e) {
      s.detail = e.what();
    }
    report.steps.push_back(s);
    return s.ok;
  };
  auto expect = [](bool cond, const std::string& what) {
    if (!cond) throw Error(Errc::MalformedInput, what);
  };
  auto finish = [&] {
    report.elapsed_ms = ms_since(t_start);
    return report;
  };

  // Services.
  ServiceHost issuer_host(opt.host), gateway_host(opt.host), proxy_host(opt.host);

  issuer::IssuerConfig icfg;
  icfg.issuer_uri = opt.issuer_uri;
  icfg.status_list_url = issuer_host.base_url() + std::string(issuer::kStatusListPath);
  icfg.vc_lifetime_seconds = opt.vc_lifetime_seconds;
  icfg.admin_key = admin_key;
  issuer::IssuerService issuer_service(icfg, jose::EcKey::generate());
  issuer::mount_routes(issuer_host.server(), issuer_service, clock);
  issuer_host.start();

  storage::GatewayConfig gcfg;
  gcfg.upload_key = upload_key;
  gcfg.read_key = read_key;
  gcfg.admin_key = admin_key;
  gcfg.public_base_url = proxy_host.base_url();
  storage::DocumentStore store;
  storage::mount_routes(gateway_host.server(), store, gcfg);
  gateway_host.start();

  const std::string issuer_url = issuer_host.base_url(), gateway_url = gateway_host.base_url(),
                    proxy_url = proxy_host.base_url();
  const httplib::Headers admin_headers{{"X-Admin-Key", admin_key}};
  bbs::KeyPair transcoder_key = bbs::keygen();
  jose::EcKey holder = jose::EcKey::generate();
  std::string vc_jwt;
  credential::CapabilityVC vc;
  std::unique_ptr<proxy::Proxy> pep;
  // Servers must stop before the services they call into are destroyed.
  struct StopAll {
    std::vector<ServiceHost*> hosts;
    ~StopAll() {
      for (auto* h : hosts) h->stop();
    }
  } stop_all{{&issuer_host, &gateway_host, &proxy_host}};

  if (!step("setup", [&] {
        auto r = post_json(issuer_url, "/admin/clients",
                           {{"client_id", opt.client_id}, {"client_secret", opt.client_secret}, {"owner_id", opt.owner_id}},
                           admin_headers);
        expect(r.status == 200, "register client: " + describe(r));
        r = post_json(issuer_url, "/admin/policies",
                      {{"client_id", opt.client_id}, {"policy", {{opt.device_id, {"temperature"}}}}}, admin_headers);
        expect(r.status == 200, "set policy: " + describe(r));
        r = post_json(gateway_url, "/admin/signers",
                      {{"keyId", transcoder_key.key_id},
                       {"publicKey", base64url_encode(bbs::public_key_to_bytes(transcoder_key.public_key))},
                       {"ownerId", opt.owner_id}},
                      admin_headers);
        expect(r.status == 200, "register signer: " + describe(r));
        r = post_json(gateway_url, "/admin/devices", {{"deviceID", opt.device_id}, {"ownerId", opt.owner_id}},
                      admin_headers);
        expect(r.status == 200, "register device: " + describe(r));

        // The proxy learns the issuer key from its JWKS; it holds no policy.
        auto jwks = get_json(issuer_url, "/jwks");
        expect(jwks.status == 200, "fetch JWKS: " + describe(jwks));
        Json jwk = jwks.body["keys"][0];
        proxy::ProxyConfig pcfg;
        pcfg.owner_id = opt.owner_id;
        pcfg.trust[opt.owner_id].push_back({opt.issuer_uri, Json{{"kty", "EC"}, {"crv", "P-256"}, {"x", jwk["x"]}, {"y", jwk["y"]}},
                                            icfg.status_list_url});
        pcfg.gateway_url = gateway_url;
        pcfg.gateway_key = read_key;
        pcfg.public_base_url = proxy_url;
        pep = std::make_unique<proxy::Proxy>(pcfg, std::make_shared<proxy::HttpDocumentSource>(gateway_url, read_key),
                                             proxy::http_status_fetcher());
        proxy::mount_routes(proxy_host.server(), *pep, clock);
        proxy_host.start();
        return std::string("issuer, gateway and proxy up");
      }))
    return finish();

  if (!step("issue", [&] {
        httplib::Client c(issuer_url);
        httplib::Params form{{"grant_type", "client_credentials"},
                             {"client_id", opt.client_id},
                             {"client_secret", opt.client_secret},
                             {"authorization_details", issuer::make_authorization_details(holder, opt.client_id, now).dump()}};
        auto r = to_reply(c.Post("/token", form));
        expect(r.status == 200, "token request: " + describe(r));
        expect(r.body.value("token_type", "") == "vc+jwt", "token_type must be vc+jwt");
        vc_jwt = r.body.at("access_token").get<std::string>();
        vc = credential::decode_vc(vc_jwt).vc;
        expect(vc.aud == opt.owner_id && vc.iss == opt.issuer_uri, "aud/iss mismatch");
        expect(vc.iat == opt.start_time && vc.exp == opt.start_time + opt.vc_lifetime_seconds, "iat/exp mismatch");
        expect(vc.capabilities == credential::Capabilities{{opt.device_id, {"temperature"}}}, "capabilities mismatch");
        return vc.jti;
      }))
    return finish();

  if (!step("upload", [&] {
        auto readings = demo_readings();
        for (auto& r : readings) r.device_id = opt.device_id;
        auto receipt = transcoder::sign_and_upload(transcoder::transcode(readings), transcoder_key, gateway_url, upload_key);
        expect(receipt.canonical_count == 7, "expected 7 canonical messages, got " + std::to_string(receipt.canonical_count));
        return "stored at " + std::to_string(receipt.stored_at);
      }))
    return finish();

  // Issues a data request through the proxy over HTTP.
  struct Call {
    std::string device;
    std::vector<std::string> fields{"temperature"};
    bool with_vc = true;
    std::string htm = "POST";
    std::string htu;  // defaults to the proxy's data URI
    std::string dpop;  // reuse a captured proof when set
  };
  std::string last_dpop;
  auto call = [&](auto tweak) {
    Call c;
    tweak(c);
    if (c.device.empty()) c.device = opt.device_id;
    std::string path = "/data?deviceID=" + httplib::detail::encode_query_param(c.device);
    httplib::Headers headers;
    if (c.with_vc) headers.emplace("Authorization", "DPoP " + vc_jwt);
    std::string proof = c.dpop.empty() ? credential::create_dpop(holder, c.htm, c.htu.empty() ? proxy_url + path : c.htu, now)
                                       : c.dpop;
    last_dpop = proof;
    headers.emplace("DPoP", proof);
    httplib::Client client(proxy_url);
    return to_reply(client.Post(path, headers, Json{{"fields", c.fields}}.dump(), "application/json"));
  };
  auto expect_reject = [&](const Reply& r, int status, const std::string& reason) {
    expect(r.status == status && r.body.value("reason", "") == reason,
           "expected " + std::to_string(status) + " " + reason + ", got " + describe(r));
    return describe(r);
  };

  std::string good_dpop;
  step("authorized_request", [&] {
    auto r = call([](Call&) {});
    good_dpop = last_dpop;
    expect(r.status == 200, "expected 200, got " + describe(r));
    auto env = proxy::DisclosureEnvelope::from_json(r.body);
    auto key_reply = get_json(proxy_url, "/keys/" + env.signer_key_id);
    expect(key_reply.status == 200, "signer key lookup: " + describe(key_reply));
    auto pk = bbs::public_key_from_bytes(base64url_decode(key_reply.body.at("publicKey").get<std::string>()));
    expect(pk == transcoder_key.public_key, "published signer key differs from the transcoder key");
    expect(proxy::verify_envelope(env, pk), "envelope does not verify");
    expect(canonical::render_document(env.display) == canonical::render_document(demo_expected_display()),
           "display mismatch: " + env.display.dump());
    return canonical::render_document(env.display);
  });
  step("wrong_field", [&] { return expect_reject(call([&](Call& c) { c.fields = {"humidity"}; }), 403, "NotAppropriate"); });
  step("unknown_device", [&] { return expect_reject(call([&](Call& c) { c.device = "monitor-unknown"; }), 403, "NotAppropriate"); });
  step("missing_credential", [&] { return expect_reject(call([&](Call& c) { c.with_vc = false; }), 401, "MissingCredential"); });
  step("replayed_dpop", [&] { return expect_reject(call([&](Call& c) { c.dpop = good_dpop; }), 401, "Replayed"); });
  step("dpop_method_mismatch", [&] { return expect_reject(call([&](Call& c) { c.htm = "GET"; }), 401, "MethodMismatch"); });
  step("dpop_uri_mismatch",
       [&] { return expect_reject(call([&](Call& c) { c.htu = proxy_url + "/other?deviceID=" + opt.device_id; }), 401, "UriMismatch"); });
  step("expired", [&] {
    std::int64_t saved = now;
    now = vc.exp + 1;
    auto r = call([](Call&) {});
    now = saved;
    return expect_reject(r, 401, "Expired");
  });
  step("revoked", [&] {
    auto r = post_json(issuer_url, "/revoke", {{"jti", vc.jti}}, admin_headers);
    expect(r.status == 200, "revoke: " + describe(r));
    now += pep->config().status_ttl_seconds + 1;  // let the cached list go stale
    return expect_reject(call([](Call&) {}), 401, "Revoked");
  });
  return finish();
}

}  // namespace selectshare::harness
