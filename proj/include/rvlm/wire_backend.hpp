#pragma once

// HTTP text-completion backend.
//
//   simple:  POST {model, prompt, image: <base64 PNG>}         -> {text}
//   chat:    POST {model, messages: [{role: user, content: [
//                   {type: text, text}, {type: image_url, image_url: {url: data:...}}]}]}
//            -> {choices: [{message: {content}}]}

#include <string>

#include <json.hpp>

#include "rvlm/inference.hpp"

namespace rvlm {

enum class WireApi { simple, chat };

struct WireConfig {
    std::string url;  // scheme://host[:port]/path
    std::string token;
    std::string model = "default";
    WireApi api = WireApi::simple;
    CoordConvention convention = CoordConvention::normalized;
    int timeout_seconds = 60;
};

/// Fields from a JSON object; R_VLM_BACKEND_URL / R_VLM_BACKEND_TOKEN fill or
/// override url/token when set.
WireConfig wire_config_from_json(const nlohmann::json& j);

nlohmann::json build_wire_request(const WireConfig& cfg, const std::string& prompt,
                                  const std::string& image_base64);
/// Throws TransportError when the expected text field is absent.
std::string extract_wire_text(WireApi api, const nlohmann::json& response);

class WireBackend final : public Backend {
public:
    explicit WireBackend(WireConfig cfg);
    std::string complete(const BackendRequest& req) override;
    CoordConvention convention() const override { return cfg_.convention; }

private:
    WireConfig cfg_;
    std::string scheme_host_port_;
    std::string path_;
};

}  // namespace rvlm
