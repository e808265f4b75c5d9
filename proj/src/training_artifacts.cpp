#include "rvlm/training_artifacts.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rvlm/base64.hpp"
#include "rvlm/errors.hpp"
#include "rvlm/json_io.hpp"

namespace rvlm {

using nlohmann::json;

// ---------------------------------------------------------------- tokenizers

std::vector<int> ByteTokenizer::encode(std::string_view text) const {
    std::vector<int> ids;
    ids.reserve(text.size());
    for (unsigned char c : text) ids.push_back(c);
    return ids;
}

std::string ByteTokenizer::decode(std::span<const int> ids) const {
    std::string out;
    out.reserve(ids.size());
    for (int id : ids) {
        if (id < 0 || id > 255) throw Error("byte tokenizer id out of range: " + std::to_string(id));
        out.push_back(static_cast<char>(id));
    }
    return out;
}

CharsetTokenizer::CharsetTokenizer(std::string alphabet) : alphabet_(std::move(alphabet)) {
    std::string sorted = alphabet_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw Error("charset tokenizer alphabet has duplicate characters");
    }
}

std::string CharsetTokenizer::id() const { return "charset-v1:" + alphabet_; }

std::vector<int> CharsetTokenizer::encode(std::string_view text) const {
    std::vector<int> ids;
    ids.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        const auto pos = alphabet_.find(text[i]);
        if (pos == std::string::npos) {
            throw Error("tokenizer cannot encode character '" + std::string(1, text[i]) +
                        "' at offset " + std::to_string(i));
        }
        ids.push_back(static_cast<int>(pos));
    }
    return ids;
}

std::string CharsetTokenizer::decode(std::span<const int> ids) const {
    std::string out;
    for (int id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= alphabet_.size()) {
            throw Error("charset tokenizer id out of range: " + std::to_string(id));
        }
        out.push_back(alphabet_[static_cast<std::size_t>(id)]);
    }
    return out;
}

CharsetTokenizer CharsetTokenizer::coordinates_and_words() {
    return CharsetTokenizer("0123456789(),. abcdefghijklmnopqrstuvwxyz");
}

std::unique_ptr<Tokenizer> make_tokenizer(std::string_view id) {
    if (id == "byte-v1") return std::make_unique<ByteTokenizer>();
    constexpr std::string_view charset = "charset-v1:";
    if (id.starts_with(charset)) {
        return std::make_unique<CharsetTokenizer>(std::string(id.substr(charset.size())));
    }
    throw SchemaError("unknown tokenizer id '" + std::string(id) + "'");
}

// ------------------------------------------------------------- serialization

namespace {

std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace

std::string format_box(const BBox& b) {
    return "(" + fixed2(b.xmin) + "," + fixed2(b.ymin) + "),(" + fixed2(b.xmax) + "," +
           fixed2(b.ymax) + ")";
}

BBox parse_box(std::string_view text) {
    double v[4];
    std::size_t pos = 0;
    const auto expect = [&](char c) {
        if (pos >= text.size() || text[pos] != c) {
            throw ParseError("expected '" + std::string(1, c) + "' at offset " + std::to_string(pos),
                             std::string(text));
        }
        ++pos;
    };
    const auto number = [&](double& out) {
        const auto* first = text.data() + pos;
        const auto [ptr, ec] = std::from_chars(first, text.data() + text.size(), out);
        if (ec != std::errc{}) {
            throw ParseError("expected a number at offset " + std::to_string(pos), std::string(text));
        }
        pos += static_cast<std::size_t>(ptr - first);
    };
    expect('(');
    number(v[0]);
    expect(',');
    number(v[1]);
    expect(')');
    expect(',');
    expect('(');
    number(v[2]);
    expect(',');
    number(v[3]);
    expect(')');
    if (pos != text.size()) throw ParseError("trailing characters after box", std::string(text));
    return BBox{v[0], v[1], v[2], v[3], std::nullopt};
}

void validate(const SegmentLayout& layout) {
    if (layout.box_spans.empty()) throw SchemaError("layout.box_spans: at least one span required");
    std::size_t cursor = layout.prefix_len;
    for (std::size_t i = 0; i < layout.box_spans.size(); ++i) {
        const auto& s = layout.box_spans[i];
        if (s.start != cursor || s.end <= s.start) {
            throw SchemaError("layout.box_spans[" + std::to_string(i) +
                              "]: spans must be contiguous, ordered and non-empty");
        }
        cursor = s.end;
    }
}

SerializedLabel serialize_label(std::string_view prefix_text, const PseudoLabelSet& set,
                                const Tokenizer& tok) {
    SerializedLabel out;
    out.token_ids = tok.encode(prefix_text);
    out.layout.prefix_len = out.token_ids.size();

    const auto append_box = [&](const BBox& b) {
        const auto ids = tok.encode(format_box(b));
        const std::size_t start = out.token_ids.size();
        out.token_ids.insert(out.token_ids.end(), ids.begin(), ids.end());
        out.layout.box_spans.push_back(TokenSpan{start, out.token_ids.size()});
    };
    append_box(set.gt);
    for (const auto& b : set.boxes) append_box(b);
    return out;
}

std::vector<double> build_loss_weights(const SegmentLayout& layout, const PseudoLabelSet& set) {
    validate(layout);
    if (layout.box_spans.size() != set.weights.size() + 1) {
        throw SchemaError("layout has " + std::to_string(layout.box_spans.size()) +
                          " box spans but the label set has " + std::to_string(set.weights.size()) +
                          " pseudo boxes");
    }
    std::vector<double> w(layout.total_len(), 1.0);
    for (std::size_t i = 1; i < layout.box_spans.size(); ++i) {
        const auto& s = layout.box_spans[i];
        std::fill(w.begin() + static_cast<std::ptrdiff_t>(s.start),
                  w.begin() + static_cast<std::ptrdiff_t>(s.end), set.weights[i - 1]);
    }
    return w;
}

// ------------------------------------------------------------ attention mask

AttentionMask::AttentionMask(SegmentLayout layout) : layout_(std::move(layout)) {
    validate(layout_);
    segment_.assign(layout_.total_len(), -1);
    for (std::size_t i = 0; i < layout_.box_spans.size(); ++i) {
        const auto& s = layout_.box_spans[i];
        std::fill(segment_.begin() + static_cast<std::ptrdiff_t>(s.start),
                  segment_.begin() + static_cast<std::ptrdiff_t>(s.end), static_cast<long>(i));
    }
}

long AttentionMask::segment_of(std::size_t pos) const noexcept { return segment_[pos]; }

bool AttentionMask::allows(std::size_t query, std::size_t key) const noexcept {
    if (key > query) return false;
    const long ks = segment_of(key);
    if (ks < 0) return true;  // prefix is visible to everything after it
    return ks == segment_of(query);
}

DenseMask AttentionMask::dense() const {
    const std::size_t n = size();
    DenseMask m;
    m.rows = n;
    m.bits.assign((n * n + 7) / 8, 0);
    // A block of 8 rows spans exactly n bytes, so blocks never share a byte.
    const auto blocks = static_cast<std::ptrdiff_t>((n + 7) / 8);
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t b = 0; b < blocks; ++b) {
        const std::size_t q_end = std::min(n, static_cast<std::size_t>(b + 1) * 8);
        for (std::size_t q = static_cast<std::size_t>(b) * 8; q < q_end; ++q) {
            for (std::size_t k = 0; k <= q; ++k) {
                if (!allows(q, k)) continue;
                const std::size_t idx = q * n + k;
                m.bits[idx >> 3] |= static_cast<std::uint8_t>(1U << (idx & 7));
            }
        }
    }
    return m;
}

DenseMask AttentionMask::dense_serial() const {
    const std::size_t n = size();
    DenseMask m;
    m.rows = n;
    m.bits.assign((n * n + 7) / 8, 0);
    for (std::size_t q = 0; q < n; ++q) {
        for (std::size_t k = 0; k < n; ++k) {
            if (!allows(q, k)) continue;
            const std::size_t idx = q * n + k;
            m.bits[idx >> 3] |= static_cast<std::uint8_t>(1U << (idx & 7));
        }
    }
    return m;
}

AttentionMask build_attention_mask(const SegmentLayout& layout) { return AttentionMask(layout); }

std::vector<int> build_position_ids(const SegmentLayout& layout) {
    validate(layout);
    const std::size_t span_len = layout.box_spans.front().size();
    for (std::size_t i = 1; i < layout.box_spans.size(); ++i) {
        if (layout.box_spans[i].size() != span_len) {
            throw SchemaError("box span " + std::to_string(i) + " has length " +
                              std::to_string(layout.box_spans[i].size()) + ", span 0 has " +
                              std::to_string(span_len));
        }
    }
    std::vector<int> pos;
    pos.reserve(layout.total_len());
    for (std::size_t i = 0; i < layout.prefix_len + span_len; ++i) pos.push_back(static_cast<int>(i));
    for (std::size_t s = 1; s < layout.box_spans.size(); ++s) {
        for (std::size_t j = 0; j < span_len; ++j) {
            pos.push_back(static_cast<int>(layout.prefix_len + j));
        }
    }
    return pos;
}

// ------------------------------------------------------------------ artifact

TrainingArtifact build_artifact(std::string_view prefix_text, const PseudoLabelSet& set,
                                const Tokenizer& tok, std::size_t prefix_offset,
                                bool with_dense_mask) {
    auto label = serialize_label(prefix_text, set, tok);
    TrainingArtifact a;
    a.tokenizer_id = tok.id();
    a.prefix_offset = prefix_offset;
    a.loss_weights = build_loss_weights(label.layout, set);
    a.position_ids = build_position_ids(label.layout);
    a.segment_weights.push_back(1.0);
    a.segment_weights.insert(a.segment_weights.end(), set.weights.begin(), set.weights.end());
    if (with_dense_mask) a.dense_mask = build_attention_mask(label.layout).dense();
    a.token_ids = std::move(label.token_ids);
    a.layout = std::move(label.layout);
    a.provenance = set;
    return a;
}

void validate(const TrainingArtifact& a) {
    const auto fail = [](const std::string& field, const std::string& why) {
        throw SchemaError(field + ": " + why);
    };
    if (a.version != 1) fail("version", "unsupported version " + std::to_string(a.version));
    validate(a.layout);
    const std::size_t n = a.layout.total_len();
    if (a.token_ids.size() != n) fail("token_ids", "length does not match segments");
    if (a.loss_weights.size() != n) fail("loss_weights", "length does not match token_ids");
    if (a.position_ids.size() != n) fail("position_ids", "length does not match token_ids");
    if (a.segment_weights.size() != a.layout.box_spans.size()) {
        fail("segments", "one weight per span required");
    }
    if (a.segment_weights.front() != 1.0) fail("segments[0].weight", "ground-truth span must weigh 1");
    if (a.provenance.boxes.size() + 1 != a.layout.box_spans.size()) {
        fail("provenance.pseudo_boxes", "count does not match segments");
    }
    for (std::size_t i = 0; i < a.layout.prefix_len; ++i) {
        if (a.loss_weights[i] != 1.0) fail("loss_weights", "prefix tokens must weigh 1");
    }
    for (std::size_t s = 0; s < a.layout.box_spans.size(); ++s) {
        const auto& span = a.layout.box_spans[s];
        for (std::size_t t = span.start; t < span.end; ++t) {
            if (a.loss_weights[t] != a.segment_weights[s]) {
                fail("loss_weights", "token " + std::to_string(t) + " disagrees with its segment weight");
            }
        }
    }
    if (a.position_ids != build_position_ids(a.layout)) {
        fail("position_ids", "spans must share the ground-truth span's positions");
    }
    if (a.dense_mask && *a.dense_mask != build_attention_mask(a.layout).dense_serial()) {
        fail("dense_mask", "does not match the segment descriptors");
    }
}

std::string artifact_to_json_string(const TrainingArtifact& a) {
    json segments = json::array();
    for (std::size_t i = 0; i < a.layout.box_spans.size(); ++i) {
        const auto& s = a.layout.box_spans[i];
        segments.push_back({{"start", s.start}, {"end", s.end}, {"weight", a.segment_weights[i]}});
    }
    json j{{"version", a.version},
           {"tokenizer_id", a.tokenizer_id},
           {"prefix_offset", a.prefix_offset},
           {"token_ids", a.token_ids},
           {"loss_weights", a.loss_weights},
           {"segments", segments},
           {"position_ids", a.position_ids},
           {"provenance",
            {{"gt", a.provenance.gt},
             {"pseudo_boxes", a.provenance.boxes},
             {"gious", a.provenance.gious},
             {"weights", a.provenance.weights},
             {"seed", a.provenance.seed}}}};
    if (a.dense_mask) {
        j["dense_mask"] = {{"rows", a.dense_mask->rows}, {"bits", base64_encode(a.dense_mask->bits)}};
    }
    return j.dump();
}


TrainingArtifact artifact_from_json_string(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("artifact is not valid JSON: ") + e.what());
    }
    TrainingArtifact a;
    a.version = require_field<int>(j, "version");
    a.tokenizer_id = require_field<std::string>(j, "tokenizer_id");
    a.prefix_offset = require_field<std::size_t>(j, "prefix_offset");
    a.token_ids = require_field<std::vector<int>>(j, "token_ids");
    a.loss_weights = require_field<std::vector<double>>(j, "loss_weights");
    a.position_ids = require_field<std::vector<int>>(j, "position_ids");

    const auto segments = require_field<json>(j, "segments");
    if (!segments.is_array() || segments.empty()) throw SchemaError("segments: non-empty array required");
    for (const auto& s : segments) {
        a.layout.box_spans.push_back(
            TokenSpan{require_field<std::size_t>(s, "start"), require_field<std::size_t>(s, "end")});
        a.segment_weights.push_back(require_field<double>(s, "weight"));
    }
    a.layout.prefix_len = a.layout.box_spans.front().start;

    const auto prov = require_field<json>(j, "provenance");
    a.provenance.gt = require_field<BBox>(prov, "gt");
    a.provenance.boxes = require_field<std::vector<BBox>>(prov, "pseudo_boxes");
    a.provenance.gious = prov.value("gious", std::vector<double>{});
    a.provenance.weights = prov.value("weights", std::vector<double>{});
    a.provenance.seed = prov.value("seed", std::uint64_t{0});

    if (j.contains("dense_mask")) {
        const auto& dm = j["dense_mask"];
        DenseMask m;
        m.rows = require_field<std::size_t>(dm, "rows");
        m.bits = base64_decode(require_field<std::string>(dm, "bits"));
        if (m.bits.size() != (m.rows * m.rows + 7) / 8) {
            throw SchemaError("dense_mask.bits: wrong length for " + std::to_string(m.rows) + " rows");
        }
        a.dense_mask = std::move(m);
    }
    validate(a);
    return a;
}

void emit_artifact(const TrainingArtifact& a, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path.string(), "cannot open for writing");
    out << artifact_to_json_string(a) << '\n';
    out.flush();
    if (!out) throw IoError(path.string(), "write failed");
}

TrainingArtifact read_artifact(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string(), "cannot open for reading");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return artifact_from_json_string(buf.str());
    } catch (const SchemaError& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

TokenCost token_cost(std::size_t prefix_len, std::size_t span_len, std::size_t num_pseudo) {
    TokenCost c;
    c.concatenated = prefix_len + (num_pseudo + 1) * span_len;
    c.independent = (num_pseudo + 1) * (prefix_len + span_len);
    c.ratio = c.independent == 0 ? 1.0
                                 : static_cast<double>(c.concatenated) / static_cast<double>(c.independent);
    c.savings = 1.0 - c.ratio;
    return c;
}

}  // namespace rvlm
