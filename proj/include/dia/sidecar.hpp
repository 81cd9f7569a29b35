#pragma once

// Client side of the model sidecar protocol (HTTP/1.1, JSON, UTF-8):
//
//   POST /v1/propose  {"prompt", "m", "schema"}            -> {"configs": [...]}
//   POST /v1/embed    {"kind": "frames", "frames", "dim"}  -> {"embeddings": [[...]]}
//                     {"kind": "text", "text", "dim"}
//
// 4xx is permanent. 5xx and connection failures are retried with exponential
// backoff.

#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "dia/config.hpp"
#include "dia/embedding.hpp"
#include "dia/error.hpp"
#include "dia/media.hpp"
#include "dia/semspace.hpp"

namespace dia {

inline std::string base64_encode(const std::vector<std::uint8_t>& data) {
  static constexpr char table[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < data.size(); i += 3) {
    const unsigned v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
    out += table[(v >> 18) & 63];
    out += table[(v >> 12) & 63];
    out += table[(v >> 6) & 63];
    out += table[v & 63];
  }
  if (i + 1 == data.size()) {
    const unsigned v = data[i] << 16;
    out += table[(v >> 18) & 63];
    out += table[(v >> 12) & 63];
    out += "==";
  } else if (i + 2 == data.size()) {
    const unsigned v = (data[i] << 16) | (data[i + 1] << 8);
    out += table[(v >> 18) & 63];
    out += table[(v >> 12) & 63];
    out += table[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{250};
};

class SidecarClient {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit SidecarClient(std::string base_url, RetryPolicy retry = {},
                         std::chrono::seconds timeout = std::chrono::seconds(30))
      : base_url_(std::move(base_url)), retry_(retry), timeout_(timeout),
        sleep_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {}

  void set_sleeper(Sleeper s) { sleep_ = std::move(s); }
  const std::string& base_url() const { return base_url_; }

  static nlohmann::json propose_request(const std::string& prompt, int m, const nlohmann::json& schema) {
    return {{"prompt", prompt}, {"m", m}, {"schema", schema}};
  }

  static nlohmann::json embed_frames_request(const std::vector<Frame>& frames, int dim) {
    nlohmann::json encoded = nlohmann::json::array();
    for (const auto& f : frames) encoded.push_back(base64_encode(encode_pnm(f)));
    return {{"kind", "frames"}, {"frames", encoded}, {"dim", dim}};
  }

  static nlohmann::json embed_text_request(const std::string& text, int dim) {
    return {{"kind", "text"}, {"text", text}, {"dim", dim}};
  }

  /// Raw config objects as returned; validation is the caller's job.
  std::vector<nlohmann::json> propose(const std::string& prompt, int m, const nlohmann::json& schema) {
    const auto body = post("/v1/propose", propose_request(prompt, m, schema));
    try {
      return body.at("configs").get<std::vector<nlohmann::json>>();
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("malformed /v1/propose response: ") + e.what(), 200, false);
    }
  }

  std::vector<Embedding> embed_frames(const std::vector<Frame>& frames, int dim) {
    return parse_embeddings(post("/v1/embed", embed_frames_request(frames, dim)), frames.size(), dim);
  }

  Embedding embed_text(const std::string& text, int dim) {
    return parse_embeddings(post("/v1/embed", embed_text_request(text, dim)), 1, dim).front();
  }

  nlohmann::json post(const std::string& path, const nlohmann::json& request) {
    const std::string payload = request.dump();
    auto backoff = retry_.initial_backoff;
    for (int attempt = 1;; ++attempt) {
      try {
        return post_once(path, payload);
      } catch (const TransportError& e) {
        if (!e.retriable() || attempt >= retry_.attempts) throw;
      }
      sleep_(backoff);
      backoff *= 2;
    }
  }

 private:
  nlohmann::json post_once(const std::string& path, const std::string& payload) const {
    httplib::Client client(base_url_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    auto res = client.Post(path, payload, "application/json");
    if (!res) {
      throw TransportError("sidecar " + base_url_ + path + " unreachable: " + httplib::to_string(res.error()), 0, true);
    }
    if (res->status >= 500) {
      throw TransportError("sidecar " + path + " returned " + std::to_string(res->status), res->status, true);
    }
    if (res->status >= 400) {
      throw TransportError("sidecar " + path + " rejected the request with " + std::to_string(res->status) + ": " +
                               res->body,
                           res->status, false);
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw TransportError("sidecar " + path + " returned invalid JSON: " + e.what(), res->status, false);
    }
  }

  static std::vector<Embedding> parse_embeddings(const nlohmann::json& body, std::size_t expected, int dim) {
    std::vector<Embedding> out;
    try {
      out = body.at("embeddings").get<std::vector<Embedding>>();
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("malformed /v1/embed response: ") + e.what(), 200, false);
    }
    require(out.size() == expected, ErrorKind::format, "sidecar returned the wrong number of embeddings");
    for (const auto& e : out) {
      require(static_cast<int>(e.size()) == dim, ErrorKind::dimension, "sidecar embedding has the wrong dimension");
      double n = 0.0;
      for (float v : e) n += static_cast<double>(v) * v;
      require(std::abs(std::sqrt(n) - 1.0) <= 1e-4, ErrorKind::range, "sidecar embedding is not unit-norm");
    }
    return out;
  }

  std::string base_url_;
  RetryPolicy retry_;
  std::chrono::seconds timeout_;
  Sleeper sleep_;
};

/// f_S backed by the sidecar's image model.
class RemoteFrameEncoder final : public FrameEncoder {
 public:
  RemoteFrameEncoder(SidecarClient& client, int dim) : client_(client), dim_(dim) {}

  Embedding encode(const Frame& frame) const override { return client_.embed_frames({frame}, dim_).front(); }
  int dim() const override { return dim_; }
  std::string descriptor() const override { return "remote(" + client_.base_url() + ",dim=" + std::to_string(dim_) + ")"; }

 private:
  SidecarClient& client_;
  int dim_;
};

/// Direct-embed g_S for caption abstractions: the caption goes to the
/// sidecar's text tower and yields a single-sample embedding set.
class RemoteTextEmbedder final : public AbstractionEmbedder {
 public:
  RemoteTextEmbedder(SidecarClient& client, int dim) : client_(client), dim_(dim) {}

  EmbeddingSet embed(const Abstraction& abstraction) const override {
    require(!abstraction.meta.caption.empty(), ErrorKind::parameter, "direct-embed mode needs a caption abstraction");
    return EmbeddingSet({client_.embed_text(abstraction.meta.caption, dim_)});
  }

 private:
  SidecarClient& client_;
  int dim_;
};

}  // namespace dia
