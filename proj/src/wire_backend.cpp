#include "rvlm/wire_backend.hpp"

#include <cstdlib>

#include <httplib.h>

#include "rvlm/base64.hpp"
#include "rvlm/image.hpp"

namespace rvlm {

WireConfig wire_config_from_json(const nlohmann::json& j) {
    WireConfig c;
    c.url = j.value("url", std::string{});
    c.token = j.value("token", std::string{});
    c.model = j.value("model", c.model);
    const auto api = j.value("api", std::string("simple"));
    if (api == "simple") {
        c.api = WireApi::simple;
    } else if (api == "chat") {
        c.api = WireApi::chat;
    } else {
        throw SchemaError("backend api must be 'simple' or 'chat', got '" + api + "'");
    }
    c.convention = parse_convention(j.value("convention", std::string("normalized")));
    c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
    if (const char* url = std::getenv("R_VLM_BACKEND_URL"); url && *url) c.url = url;
    if (const char* tok = std::getenv("R_VLM_BACKEND_TOKEN"); tok && *tok) c.token = tok;
    if (c.url.empty()) throw SchemaError("backend url missing (config 'url' or R_VLM_BACKEND_URL)");
    return c;
}

nlohmann::json build_wire_request(const WireConfig& cfg, const std::string& prompt,
                                  const std::string& image_base64) {
    if (cfg.api == WireApi::simple) {
        return {{"model", cfg.model}, {"prompt", prompt}, {"image", image_base64}};
    }
    nlohmann::json content = nlohmann::json::array(
        {{{"type", "text"}, {"text", prompt}},
         {{"type", "image_url"},
          {"image_url", {{"url", "data:image/png;base64," + image_base64}}}}});
    return {{"model", cfg.model},
            {"messages", nlohmann::json::array({{{"role", "user"}, {"content", content}}})}};
}

std::string extract_wire_text(WireApi api, const nlohmann::json& response) {
    try {
        if (api == WireApi::simple) return response.at("text").get<std::string>();
        const auto& content = response.at("choices").at(0).at("message").at("content");
        if (content.is_string()) return content.get<std::string>();
        std::string text;
        for (const auto& part : content) {
            if (part.value("type", "") == "text") text += part.value("text", "");
        }
        return text;
    } catch (const nlohmann::json::exception& e) {
        throw TransportError(std::string("unexpected backend response: ") + e.what());
    }
}

WireBackend::WireBackend(WireConfig cfg) : cfg_(std::move(cfg)) {
    const auto scheme_end = cfg_.url.find("://");
    if (scheme_end == std::string::npos) throw SchemaError("backend url needs a scheme: " + cfg_.url);
    const auto path_start = cfg_.url.find('/', scheme_end + 3);
    scheme_host_port_ = cfg_.url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : cfg_.url.substr(path_start);
}

std::string WireBackend::complete(const BackendRequest& req) {
    if (!req.image) throw TransportError("wire backend needs image pixels");
    const auto png = encode_png(*req.image);
    const std::string b64 = base64_encode(png);
    const auto body = build_wire_request(cfg_, req.prompt, b64).dump();

    // One client per call keeps concurrent samples independent.
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(cfg_.timeout_seconds, 0);
    client.set_read_timeout(cfg_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!cfg_.token.empty()) headers.emplace("Authorization", "Bearer " + cfg_.token);

    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) throw TransportError("POST " + cfg_.url + " failed: " + httplib::to_string(res.error()));
    if (res->status != 200) {
        throw TransportError("POST " + cfg_.url + " returned HTTP " + std::to_string(res->status));
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
        throw TransportError(std::string("backend response is not JSON: ") + e.what());
    }
    return extract_wire_text(cfg_.api, j);
}

}  // namespace rvlm
