#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <thread>

#include <httplib.h>

#include "fixtures.hpp"
#include "rvlm/errors.hpp"
#include "rvlm/inference.hpp"
#include "rvlm/wire_backend.hpp"

using namespace rvlm;

namespace {

BBox box(double a, double b, double c, double d) { return BBox{a, b, c, d, std::nullopt}; }

const BBox& as_box(const Prediction& p) { return std::get<BBox>(p); }

Screenshot dims_only(int w, int h) { return Screenshot{nullptr, ImageDims{w, h}}; }

/// Returns canned answers in order; throws TransportError for "!".
class ScriptedBackend final : public Backend {
public:
    explicit ScriptedBackend(std::vector<std::string> answers) : answers_(std::move(answers)) {}
    std::string complete(const BackendRequest& req) override {
        requests.push_back(req);
        const auto& a = answers_.at(std::min(calls++, answers_.size() - 1));
        if (a == "!") throw TransportError("scripted failure");
        return a;
    }
    std::vector<BackendRequest> requests;
    std::size_t calls = 0;

private:
    std::vector<std::string> answers_;
};

}  // namespace

TEST(ParseCoords, BoxForms) {
    const BBox want = box(0.1, 0.2, 0.3, 0.4);
    EXPECT_EQ(as_box(parse_coords("(0.1,0.2),(0.3,0.4)", Mode::box)), want);
    EXPECT_EQ(as_box(parse_coords("The element is at (0.10, 0.20), (0.30, 0.40).", Mode::box)), want);
    EXPECT_EQ(as_box(parse_coords("(0.1,0.2,0.3,0.4)", Mode::box)), want);
    EXPECT_EQ(as_box(parse_coords("box: [0.1, 0.2, 0.3, 0.4]", Mode::box)), want);
    EXPECT_EQ(as_box(parse_coords("(0.3,0.4),(0.1,0.2)", Mode::box)), want);
}

TEST(ParseCoords, FirstGroupWins) {
    EXPECT_EQ(as_box(parse_coords("[0.1,0.2,0.3,0.4] or (0.5,0.5),(0.6,0.6)", Mode::box)),
              box(0.1, 0.2, 0.3, 0.4));
    const auto p = std::get<PointCoord>(parse_coords("click (0.25, 0.75) then (0.9,0.9)", Mode::point));
    EXPECT_DOUBLE_EQ(p.x, 0.25);
    EXPECT_DOUBLE_EQ(p.y, 0.75);
}

TEST(ParseCoords, Conventions) {
    const BBox want = box(0.1, 0.2, 0.3, 0.4);
    const auto near = [&](const BBox& b) {
        EXPECT_NEAR(b.xmin, want.xmin, 1e-12);
        EXPECT_NEAR(b.ymin, want.ymin, 1e-12);
        EXPECT_NEAR(b.xmax, want.xmax, 1e-12);
        EXPECT_NEAR(b.ymax, want.ymax, 1e-12);
    };
    near(as_box(parse_coords("(10,20),(30,40)", Mode::box, CoordConvention::percent)));
    near(as_box(parse_coords("(100,200),(300,400)", Mode::box, CoordConvention::per_mille)));
    near(as_box(parse_coords("(128,160),(384,320)", Mode::box, CoordConvention::pixel, ImageDims{1280, 800})));
    EXPECT_THROW(parse_coords("(10,20),(30,40)", Mode::box), ParseError);
    EXPECT_THROW(parse_coords("(10,20),(30,4000)", Mode::box, CoordConvention::pixel, ImageDims{5000, 5000}),
                 ParseError);
}

TEST(ParseCoords, Failures) {
    EXPECT_THROW(parse_coords("I cannot determine the location of that element.", Mode::box), ParseError);
    EXPECT_THROW(parse_coords("", Mode::point), ParseError);
    EXPECT_THROW(parse_coords("(0.1)", Mode::point), ParseError);
}

TEST(FormatPrediction, RoundTrips) {
    const Prediction p = box(0.123456789, 0.2, 0.3, 0.987654321);
    EXPECT_EQ(format_prediction(p), "(0.12,0.20),(0.30,0.99)");
    EXPECT_EQ(as_box(parse_coords(format_prediction(p, -1), Mode::box)), std::get<BBox>(p));
}

TEST(SimOracle, NoiseStdMatchesScale) {
    const BBox gt = box(0.4, 0.45, 0.5, 0.5);
    SimOracleBackend sim({gt, 0.02, 0.0, 17, -1});
    const CropSpec full{0, 0, 1000, 1000, ImageDims{1000, 1000}};
    double sum = 0, sq = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const auto b = as_box(parse_coords(sim.complete({"p", nullptr, {1000, 1000}, full, Mode::box, 1}), Mode::box));
        const double d = b.xmin - gt.xmin;
        sum += d;
        sq += d * d;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sq / n - mean * mean);
    EXPECT_NEAR(sd, 0.02, 0.002);
    EXPECT_NEAR(mean, 0.0, 0.001);
    EXPECT_EQ(sim.calls(), static_cast<std::size_t>(n));
}

TEST(SimOracle, NoiseIsViewRelative) {
    const BBox gt = box(0.4, 0.4, 0.42, 0.42);
    SimOracleBackend sim({gt, 0.05, 0.0, 5, -1});
    const CropSpec crop{300, 300, 500, 500, ImageDims{1000, 1000}};
    double sq = 0;
    const BBox view_gt = to_view(gt, crop);
    for (int i = 0; i < 4000; ++i) {
        const auto b = as_box(parse_coords(sim.complete({"p", nullptr, {1000, 1000}, crop, Mode::box, 2}), Mode::box));
        const double d = from_view(BBox{b.xmin, b.ymin, b.xmax, b.ymax, crop}, crop).xmin -
                         from_view(view_gt, crop).xmin;
        sq += d * d;
    }
    EXPECT_NEAR(std::sqrt(sq / 4000), 0.05 * 0.2, 0.05 * 0.2 * 0.1);
}

TEST(SimOracle, AlwaysFails) {
    SimOracleBackend sim({box(0.1, 0.1, 0.2, 0.2), 0.0, 1.0, 1, 2});
    const CropSpec full{0, 0, 100, 100, ImageDims{100, 100}};
    for (int i = 0; i < 50; ++i) {
        EXPECT_THROW(parse_coords(sim.complete({"p", nullptr, {100, 100}, full, Mode::box, 1}), Mode::box),
                     ParseError);
    }
}

TEST(Grounding, SingleStageIsOneCall) {
    const BBox gt = box(0.31, 0.52, 0.37, 0.55);
    SimOracleBackend sim({gt, 0.0, 0.0, 1, 2});
    GroundConfig cfg;
    cfg.stages = 1;
    const auto r = ground_multistage(sim, dims_only(1280, 800), "open settings", cfg);
    EXPECT_EQ(r.backend_calls, 1u);
    EXPECT_EQ(sim.calls(), 1u);
    ASSERT_EQ(r.stages.size(), 1u);
    EXPECT_EQ(as_box(r.final), box(0.31, 0.52, 0.37, 0.55));
    EXPECT_EQ(r.stages[0].prompt,
              "In this UI screenshot, what is the position of the element corresponding to the "
              "command \"open settings\" (with bbox)?");
}

TEST(Grounding, NoiselessOracleIsFixedPoint) {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 200; ++i) {
        const BBox gt = oracle::random_small_box(rng, 0.001, 0.05);
        SimOracleBackend sim({gt, 0.0, 0.0, 1, -1});
        GroundConfig cfg;
        cfg.stages = 3;
        const auto r = ground_multistage(sim, dims_only(1920, 1080), "x", cfg);
        const BBox& f = as_box(r.final);
        EXPECT_NEAR(f.xmin, gt.xmin, 1e-12);
        EXPECT_NEAR(f.ymin, gt.ymin, 1e-12);
        EXPECT_NEAR(f.xmax, gt.xmax, 1e-12);
        EXPECT_NEAR(f.ymax, gt.ymax, 1e-12);
    }
}

TEST(Grounding, TwoDecimalOracleErrorShrinksWithZoom) {
    std::mt19937_64 rng(6);
    for (int i = 0; i < 200; ++i) {
        const BBox gt = oracle::random_small_box(rng, 0.001, 0.05);
        SimOracleBackend sim({gt, 0.0, 0.0, 1, 2});
        GroundConfig cfg;
        cfg.stages = 2;
        const auto r = ground_multistage(sim, dims_only(1920, 1080), "x", cfg);
        const BBox& f = as_box(r.final);
        const CropSpec& c = r.stages[1].crop;
        const double tol_x = 0.005 * c.width() / 1920.0 + 1e-12;
        const double tol_y = 0.005 * c.height() / 1080.0 + 1e-12;
        EXPECT_NEAR(f.xmin, gt.xmin, tol_x);
        EXPECT_NEAR(f.xmax, gt.xmax, tol_x);
        EXPECT_NEAR(f.ymin, gt.ymin, tol_y);
        EXPECT_NEAR(f.ymax, gt.ymax, tol_y);
    }
}

TEST(Grounding, CallsEqualStages) {
    for (int stages = 1; stages <= 4; ++stages) {
        SimOracleBackend sim({box(0.5, 0.5, 0.52, 0.53), 0.01, 0.0, 9, 2});
        GroundConfig cfg;
        cfg.stages = stages;
        const auto r = ground_multistage(sim, dims_only(1280, 800), "x", cfg);
        EXPECT_EQ(r.backend_calls, static_cast<std::size_t>(stages));
        EXPECT_EQ(sim.calls(), static_cast<std::size_t>(stages));
        EXPECT_EQ(r.stages.size(), static_cast<std::size_t>(stages));
    }
}

TEST(Grounding, CropsComeFromOriginalImage) {
    ScriptedBackend be({"(0.4,0.4),(0.5,0.5)", "(0.4,0.4),(0.6,0.6)", "(0.4,0.4),(0.6,0.6)"});
    GroundConfig cfg;
    cfg.stages = 3;
    const auto r = ground_multistage(be, dims_only(1000, 1000), "x", cfg);
    EXPECT_EQ(r.stages[1].crop, (CropSpec{200, 200, 700, 700, ImageDims{1000, 1000}}));
    const BBox s2 = as_box(*r.stages[1].inverted);
    EXPECT_NEAR(s2.xmin, 0.4, 1e-12);
    EXPECT_NEAR(s2.xmax, 0.5, 1e-12);
    EXPECT_EQ(r.stages[2].crop, zoom_region(ImageDims{1000, 1000}, s2, 5));
    EXPECT_EQ(r.stages[2].crop.source, (ImageDims{1000, 1000}));
    for (const auto& req : be.requests) EXPECT_EQ(req.view_dims, (ImageDims{1000, 1000}));
}

TEST(Grounding, MidChainFailureFallsBack) {
    ScriptedBackend be({"(0.4,0.4),(0.5,0.5)", "no idea", "(0.4,0.4),(0.6,0.6)"});
    GroundConfig cfg;
    cfg.stages = 3;
    const auto r = ground_multistage(be, dims_only(1000, 1000), "x", cfg);
    EXPECT_TRUE(r.fallback_used);
    EXPECT_EQ(r.backend_calls, 3u);
    EXPECT_FALSE(r.stages[1].ok());
    EXPECT_FALSE(r.stages[1].error.empty());
    EXPECT_EQ(r.stages[2].crop, r.stages[1].crop);
    EXPECT_NEAR(as_box(r.final).xmax, 0.5, 1e-12);

    ScriptedBackend last({"(0.4,0.4),(0.5,0.5)", "nothing"});
    cfg.stages = 2;
    const auto r2 = ground_multistage(last, dims_only(1000, 1000), "x", cfg);
    EXPECT_TRUE(r2.fallback_used);
    EXPECT_EQ(as_box(r2.final), box(0.4, 0.4, 0.5, 0.5));
}

TEST(Grounding, StageOneFailureThrows) {
    ScriptedBackend be({"nothing"});
    try {
        ground_multistage(be, dims_only(100, 100), "x", GroundConfig{});
        FAIL() << "expected GroundingError";
    } catch (const GroundingError& e) {
        EXPECT_EQ(e.stage().stage, 1);
        EXPECT_EQ(e.stage().raw_text, "nothing");
    }
}

TEST(Grounding, TransportRetry) {
    ScriptedBackend be({"!", "(0.1,0.1),(0.2,0.2)"});
    GroundConfig cfg;
    cfg.stages = 1;
    const auto r = ground_multistage(be, dims_only(100, 100), "x", cfg);
    EXPECT_EQ(r.backend_calls, 2u);
    ScriptedBackend dead({"!"});
    EXPECT_THROW(ground_multistage(dead, dims_only(100, 100), "x", cfg), GroundingError);
    EXPECT_EQ(dead.calls, 2u);
}

TEST(Grounding, PointModeUsesPointRegion) {
    SimOracleBackend sim({box(0.48, 0.48, 0.52, 0.52), 0.0, 0.0, 1, -1});
    GroundConfig cfg;
    cfg.mode = Mode::point;
    const auto r = ground_multistage(sim, dims_only(1000, 1000), "x", cfg);
    const auto& p = std::get<PointCoord>(r.final);
    EXPECT_NEAR(p.x, 0.5, 1e-12);
    EXPECT_NEAR(p.y, 0.5, 1e-12);
    EXPECT_EQ(r.stages[1].crop, point_region(ImageDims{1000, 1000}, PointCoord{0.5, 0.5, std::nullopt}, 0.3));
    EXPECT_NE(r.stages[0].prompt.find("(with point)"), std::string::npos);
}

TEST(Grounding, PixelsAreZoomedToFullSize) {
    const cv::Mat img = oracle::synthetic_screenshot(320, 200, 1);
    struct Capture final : Backend {
        std::vector<cv::Size> sizes;
        std::string complete(const BackendRequest& req) override {
            sizes.push_back(req.image->size());
            return "(0.4,0.4),(0.5,0.5)";
        }
    } be;
    const auto r = ground_multistage(be, Screenshot{&img, {}}, "x", GroundConfig{});
    ASSERT_EQ(be.sizes.size(), 2u);
    EXPECT_EQ(be.sizes[0], cv::Size(320, 200));
    EXPECT_EQ(be.sizes[1], cv::Size(320, 200));
    EXPECT_EQ(r.stages[1].crop.source, (ImageDims{320, 200}));
}

TEST(Navigation, EmptyHistoryMatchesPlainGrounding) {
    SimOracleBackend a({box(0.2, 0.3, 0.25, 0.33), 0.02, 0.0, 3, 2});
    SimOracleBackend b({box(0.2, 0.3, 0.25, 0.33), 0.02, 0.0, 3, 2});
    const auto ra = ground_multistage(a, dims_only(1280, 800), "x", GroundConfig{});
    const auto rb = ground_navigation(b, dims_only(1280, 800), "x", {}, GroundConfig{});
    EXPECT_EQ(result_to_json(ra, Mode::box), result_to_json(rb, Mode::box));
}

TEST(Navigation, CropCoversHistoryAndPromptUsesViewCoordinates) {
    ScriptedBackend be({"(0.4,0.4),(0.5,0.5)", "(0.1,0.1),(0.2,0.2)"});
    const std::vector<HistoryAction> history{{"click", PointCoord{0.9, 0.1, std::nullopt}},
                                             {"type", PointCoord{0.45, 0.45, std::nullopt}}};
    const auto r = ground_navigation(be, dims_only(1000, 1000), "x", history, GroundConfig{});
    const CropSpec& c = r.stages[1].crop;
    EXPECT_LE(c.xmin, 900);
    EXPECT_GE(c.xmax, 900);
    EXPECT_LE(c.ymin, 100);
    EXPECT_GE(c.ymax, 100);
    const CropSpec base = zoom_region(ImageDims{1000, 1000}, box(0.4, 0.4, 0.5, 0.5), 5);
    EXPECT_LE(c.xmin, base.xmin);
    EXPECT_LE(c.ymin, base.ymin);
    EXPECT_GE(c.xmax, base.xmax);
    EXPECT_GE(c.ymax, base.ymax);

    EXPECT_NE(r.stages[0].prompt.find("Previous actions: click (0.90,0.10); type (0.45,0.45)"),
              std::string::npos);
    const std::string& p2 = r.stages[1].prompt;
    const auto pos = p2.find("click (");
    ASSERT_NE(pos, std::string::npos);
    const auto v = std::get<PointCoord>(parse_coords(p2.substr(pos), Mode::point));
    const auto back = from_view(PointCoord{v.x, v.y, c}, c);
    EXPECT_NEAR(back.x, 0.9, 0.01);
    EXPECT_NEAR(back.y, 0.1, 0.01);
}

TEST(Navigation, HistoryPlaceholder) {
    ScriptedBackend be({"(0.1,0.1)"});
    GroundConfig cfg;
    cfg.stages = 1;
    cfg.mode = Mode::point;
    cfg.base_template = "{history} | now: {instruction}";
    const auto r = ground_navigation(be, dims_only(100, 100), "go",
                                     {{"click", PointCoord{0.5, 0.25, std::nullopt}}}, cfg);
    EXPECT_EQ(r.stages[0].prompt, "Previous actions: click (0.50,0.25) | now: go");
}

// ---------------------------------------------------------------- wire

namespace {

struct LocalServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<int> hits{0};
    std::string last_body;
    std::string last_auth;

    explicit LocalServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
        server.Post("/v1/complete", [this, handler](const httplib::Request& req, httplib::Response& res) {
            ++hits;
            last_body = req.body;
            last_auth = req.get_header_value("Authorization");
            handler(req, res);
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~LocalServer() {
        server.stop();
        thread.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port) + "/v1/complete"; }
};

}  // namespace

TEST(Wire, SimpleApiRoundTrip) {
    LocalServer srv([](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"json({"text":"at (0.10,0.20),(0.30,0.40)"})json", "application/json");
    });
    WireConfig cfg;
    cfg.url = srv.url();
    cfg.token = "secret";
    WireBackend be(cfg);
    const cv::Mat img = oracle::synthetic_screenshot(64, 48, 2);
    GroundConfig gc;
    gc.stages = 2;
    const auto r = ground_multistage(be, Screenshot{&img, {}}, "open menu", gc);
    EXPECT_EQ(srv.hits, 2);
    EXPECT_EQ(srv.last_auth, "Bearer secret");
    const auto body = nlohmann::json::parse(srv.last_body);
    EXPECT_EQ(body["model"], "default");
    EXPECT_NE(body["prompt"].get<std::string>().find("open menu"), std::string::npos);
    EXPECT_FALSE(body["image"].get<std::string>().empty());
    EXPECT_EQ(r.stages.size(), 2u);
}

TEST(Wire, ChatApiRoundTrip) {
    LocalServer srv([](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"json({"choices":[{"message":{"content":"[10, 20, 30, 40]"}}]})json", "application/json");
    });
    WireConfig cfg;
    cfg.url = srv.url();
    cfg.api = WireApi::chat;
    cfg.convention = CoordConvention::percent;
    WireBackend be(cfg);
    const cv::Mat img = oracle::synthetic_screenshot(64, 48, 2);
    GroundConfig gc;
    gc.stages = 1;
    const auto r = ground_multistage(be, Screenshot{&img, {}}, "x", gc);
    EXPECT_NEAR(as_box(r.final).xmax, 0.3, 1e-12);
    const auto body = nlohmann::json::parse(srv.last_body);
    const auto& content = body["messages"][0]["content"];
    EXPECT_EQ(content[0]["type"], "text");
    EXPECT_EQ(content[1]["type"], "image_url");
    EXPECT_EQ(content[1]["image_url"]["url"].get<std::string>().rfind("data:image/png;base64,", 0), 0u);
}

TEST(Wire, ServerErrorIsRetriedThenReported) {
    LocalServer srv([](const httplib::Request&, httplib::Response& res) { res.status = 503; });
    WireConfig cfg;
    cfg.url = srv.url();
    WireBackend be(cfg);
    const cv::Mat img = oracle::synthetic_screenshot(64, 48, 2);
    GroundConfig gc;
    gc.stages = 1;
    gc.transport_retries = 2;
    EXPECT_THROW(ground_multistage(be, Screenshot{&img, {}}, "x", gc), GroundingError);
    EXPECT_EQ(srv.hits, 3);
}

TEST(Wire, ConfigAndExtraction) {
    EXPECT_THROW(extract_wire_text(WireApi::simple, nlohmann::json{{"other", 1}}), TransportError);
    EXPECT_EQ(extract_wire_text(WireApi::chat, nlohmann::json::parse(
                                                   R"json({"choices":[{"message":{"content":"hi"}}]})json")),
              "hi");
    EXPECT_THROW(WireBackend(WireConfig{}), SchemaError);
}
