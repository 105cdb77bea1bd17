#include <chrono>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "voxhub/backend_server.hpp"
#include "voxhub/backends.hpp"
#include "voxhub/error.hpp"
#include "voxhub/json_io.hpp"

namespace voxhub {

using nlohmann::json;

namespace {

std::string joined_path(const std::string& base, std::string_view suffix) {
  auto [origin, path] = split_url(base);
  if (!path.empty() && path.back() == '/') path.pop_back();
  return path + std::string(suffix);
}

httplib::Client make_client(const std::string& url, std::chrono::milliseconds timeout) {
  httplib::Client cli(split_url(url).first);
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  cli.set_connection_timeout(secs.count(), usecs.count());
  cli.set_read_timeout(secs.count(), usecs.count());
  cli.set_write_timeout(secs.count(), usecs.count());
  return cli;
}

[[noreturn]] void unavailable(const std::string& url, httplib::Error err) {
  throw Error(ErrorCode::backend_unavailable, url + ": " + httplib::to_string(err));
}

/// Maps a non-2xx backend answer {"error": code, "detail": ...} to an Error.
[[noreturn]] void raise_backend_error(const httplib::Result& res) {
  json body = json::parse(res->body, nullptr, false);
  std::string code = body.is_object() ? body.value("error", "") : "";
  std::string detail = body.is_object() ? body.value("detail", res->body) : res->body;
  for (ErrorCode c : {ErrorCode::invalid_input, ErrorCode::unknown_voice, ErrorCode::unknown_agent,
                      ErrorCode::transcription_failed})
    if (code == to_string(c)) throw Error(c, detail);
  throw Error(ErrorCode::backend_unavailable,
              "backend answered HTTP " + std::to_string(res->status) + ": " + detail);
}

Millis header_millis(const httplib::Result& res, const char* name) {
  if (!res->has_header(name))
    throw Error(ErrorCode::protocol_error, std::string("missing header ") + name);
  try {
    return std::stoll(res->get_header_value(name));
  } catch (const std::exception&) {
    throw Error(ErrorCode::protocol_error, std::string("bad header ") + name);
  }
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_input:
    case ErrorCode::protocol_error: return 400;
    case ErrorCode::unknown_voice:
    case ErrorCode::unknown_agent: return 404;
    case ErrorCode::transcription_failed:
    case ErrorCode::unsupported_format:
    case ErrorCode::malformed_payload: return 422;
    default: return 500;
  }
}

void write_error(httplib::Response& res, ErrorCode code, const std::string& detail) {
  res.status = status_for(code);
  res.set_content(json{{"error", to_string(code)}, {"detail", detail}}.dump(), "application/json");
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    write_error(res, e.code(), e.what());
  } catch (const json::exception& e) {
    write_error(res, ErrorCode::invalid_input, e.what());
  }
}

}  // namespace

std::pair<std::string, std::string> split_url(const std::string& url) {
  auto scheme = url.find("://");
  auto host_start = scheme == std::string::npos ? 0 : scheme + 3;
  auto slash = url.find('/', host_start);
  if (slash == std::string::npos) return {url, ""};
  return {url.substr(0, slash), url.substr(slash)};
}

// --- clients ---------------------------------------------------------------

HttpSpeechToText::HttpSpeechToText(std::string base_url, std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {}

Transcription HttpSpeechToText::transcribe(const AudioEnvelope& env) {
  auto cli = make_client(base_url_, timeout_);
  httplib::Headers headers{{"X-Audio-Format", std::string(to_string(env.format))}};
  std::string body(env.payload.begin(), env.payload.end());
  auto res = cli.Post(joined_path(base_url_, "/v1/transcribe"), headers, body, "application/octet-stream");
  if (!res) unavailable(base_url_, res.error());
  if (res->status != 200) raise_backend_error(res);
  json j = json::parse(res->body, nullptr, false);
  if (!j.is_object() || !j.contains("text") || !j.contains("processing_ms"))
    throw Error(ErrorCode::protocol_error, "malformed transcribe response");
  try {
    return Transcription{j.at("text").get<std::string>(), j.at("processing_ms").get<Millis>()};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::protocol_error, e.what());
  }
}

HttpTextToSpeech::HttpTextToSpeech(std::string base_url, std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {}

Synthesis HttpTextToSpeech::synthesize(std::string_view text, const std::string& voice_id) {
  auto cli = make_client(base_url_, timeout_);
  json req{{"text", text}, {"voice_id", voice_id}};
  auto res = cli.Post(joined_path(base_url_, "/v1/synthesize"), req.dump(), "application/json");
  if (!res) unavailable(base_url_, res.error());
  if (res->status != 200) raise_backend_error(res);
  Synthesis out;
  out.env.format = audio_format_from_string(res->get_header_value("X-Audio-Format"));
  out.env.payload.assign(res->body.begin(), res->body.end());
  out.processing_ms = header_millis(res, "X-Processing-Ms");
  out.duration_ms = header_millis(res, "X-Duration-Ms");
  return out;
}

std::vector<VoiceDescriptor> HttpTextToSpeech::voices() {
  auto cli = make_client(base_url_, timeout_);
  auto res = cli.Get(joined_path(base_url_, "/v1/voices"));
  if (!res) unavailable(base_url_, res.error());
  if (res->status != 200) raise_backend_error(res);
  try {
    std::vector<VoiceDescriptor> out;
    json body = json::parse(res->body);
    for (const json& v : body.at("voices")) {
      VoiceDescriptor d;
      d.voice_id = v.at("voice_id").get<std::string>();
      d.display_name = v.value("display_name", d.voice_id);
      out.push_back(std::move(d));
    }
    return out;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::protocol_error, e.what());
  }
}

HttpAgent::HttpAgent(std::string endpoint, std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)), timeout_(timeout) {}

AgentReply HttpAgent::respond(const std::string& sender_id, std::string_view message) {
  auto cli = make_client(endpoint_, timeout_);
  std::string path = split_url(endpoint_).second;
  if (path.empty() || path == "/") path = "/v1/respond";
  json req{{"sender_id", sender_id}, {"message", message}};
  auto started = std::chrono::steady_clock::now();
  auto res = cli.Post(path, req.dump(), "application/json");
  if (!res) unavailable(endpoint_, res.error());
  if (res->status != 200) raise_backend_error(res);
  AgentReply out;
  out.processing_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - started)
                          .count();
  json j = json::parse(res->body, nullptr, false);
  if (!j.is_array()) throw Error(ErrorCode::protocol_error, "respond answer is not a list");
  for (const json& item : j) {
    if (!item.is_object() || !item.contains("text") || !item.at("text").is_string())
      throw Error(ErrorCode::protocol_error, "respond item without text");
    out.replies.push_back(item.at("text").get<std::string>());
  }
  return out;
}

// --- server ----------------------------------------------------------------

struct BackendServer::Impl {
  std::shared_ptr<SpeechToText> stt;
  std::shared_ptr<TextToSpeech> tts;
  AgentRouter agents;
  std::string default_agent;
  httplib::Server server;
  std::thread thread;

  void respond(const std::string& agent_id, const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      json body = json::parse(req.body);
      AgentReply reply = agents.respond(agent_id, body.at("sender_id").get<std::string>(),
                                        body.at("message").get<std::string>());
      json out = json::array();
      for (const auto& text : reply.replies) out.push_back({{"text", text}});
      res.set_content(out.dump(), "application/json");
    });
  }

  void routes() {
    server.Post("/v1/transcribe", [this](const httplib::Request& req, httplib::Response& res) {
      if (!stt) return write_error(res, ErrorCode::backend_unavailable, "no STT here");
      guarded(res, [&] {
        AudioEnvelope env{audio_format_from_string(req.get_header_value("X-Audio-Format")),
                          Bytes(req.body.begin(), req.body.end())};
        Transcription t = stt->transcribe(env);
        res.set_content(json{{"text", t.text}, {"processing_ms", t.processing_ms}}.dump(),
                        "application/json");
      });
    });
    server.Post("/v1/synthesize", [this](const httplib::Request& req, httplib::Response& res) {
      if (!tts) return write_error(res, ErrorCode::backend_unavailable, "no TTS here");
      guarded(res, [&] {
        json body = json::parse(req.body);
        Synthesis s = tts->synthesize(body.at("text").get<std::string>(),
                                      body.at("voice_id").get<std::string>());
        res.set_header("X-Processing-Ms", std::to_string(s.processing_ms));
        res.set_header("X-Duration-Ms", std::to_string(s.duration_ms));
        res.set_header("X-Audio-Format", std::string(to_string(s.env.format)));
        res.set_content(std::string(s.env.payload.begin(), s.env.payload.end()),
                        "application/octet-stream");
      });
    });
    server.Get("/v1/voices", [this](const httplib::Request&, httplib::Response& res) {
      if (!tts) return write_error(res, ErrorCode::backend_unavailable, "no TTS here");
      guarded(res, [&] {
        json voices = json::array();
        for (const auto& v : tts->voices())
          voices.push_back({{"voice_id", v.voice_id}, {"display_name", v.display_name}});
        res.set_content(json{{"voices", voices}}.dump(), "application/json");
      });
    });
    server.Post("/v1/respond", [this](const httplib::Request& req, httplib::Response& res) {
      respond(default_agent, req, res);
    });
    server.Post(R"(/agents/([A-Za-z0-9_\-]+)/v1/respond)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  respond(req.matches[1], req, res);
                });
  }
};

BackendServer::BackendServer(std::shared_ptr<SpeechToText> stt, std::shared_ptr<TextToSpeech> tts,
                             AgentRouter agents, std::string default_agent)
    : impl_(std::make_unique<Impl>()) {
  impl_->stt = std::move(stt);
  impl_->tts = std::move(tts);
  impl_->agents = std::move(agents);
  impl_->default_agent = std::move(default_agent);
  impl_->routes();
}

BackendServer::~BackendServer() { stop(); }

int BackendServer::bind(const std::string& host, int port) {
  int bound = port == 0 ? impl_->server.bind_to_any_port(host)
                        : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorCode::config_error, "cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void BackendServer::start() {
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void BackendServer::serve() { impl_->server.listen_after_bind(); }

void BackendServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace voxhub
