#pragma once

// Training-label layout for IoU-aware loss: the ground-truth box followed by M
// pseudo boxes in one sequence, with per-token loss weights, an attention mask
// that isolates every box span from the others, and position ids that make
// every span reuse the ground-truth span's positions.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rvlm/geometry.hpp"
#include "rvlm/pseudo_label.hpp"

namespace rvlm {

class Tokenizer {
public:
    virtual ~Tokenizer() = default;
    virtual std::string id() const = 0;
    /// Throws Error when a character has no token.
    virtual std::vector<int> encode(std::string_view text) const = 0;
    virtual std::string decode(std::span<const int> ids) const = 0;
};

/// One token per byte; id == byte value.
class ByteTokenizer final : public Tokenizer {
public:
    std::string id() const override { return "byte-v1"; }
    std::vector<int> encode(std::string_view text) const override;
    std::string decode(std::span<const int> ids) const override;
};

/// Closed alphabet; id == index of the character in the alphabet.
class CharsetTokenizer final : public Tokenizer {
public:
    explicit CharsetTokenizer(std::string alphabet);
    std::string id() const override;
    std::vector<int> encode(std::string_view text) const override;
    std::string decode(std::span<const int> ids) const override;

    /// Digits, "(),.", space, lowercase letters.
    static CharsetTokenizer coordinates_and_words();

private:
    std::string alphabet_;
};

std::unique_ptr<Tokenizer> make_tokenizer(std::string_view id);

/// "(x1,y1),(x2,y2)" with two decimals per field; always 23 characters for
/// coordinates in [0,1].
std::string format_box(const BBox& b);
/// Inverse of format_box; throws ParseError.
BBox parse_box(std::string_view text);

struct TokenSpan {
    std::size_t start = 0;
    std::size_t end = 0;  // exclusive

    std::size_t size() const noexcept { return end - start; }
    bool operator==(const TokenSpan&) const = default;
};

struct SegmentLayout {
    std::size_t prefix_len = 0;
    std::vector<TokenSpan> box_spans;  // [0] is the ground truth

    std::size_t total_len() const noexcept {
        return box_spans.empty() ? prefix_len : box_spans.back().end;
    }
    bool operator==(const SegmentLayout&) const = default;
};

/// Throws SchemaError if spans are not contiguous, ordered and non-empty.
void validate(const SegmentLayout& layout);

struct SerializedLabel {
    std::vector<int> token_ids;
    SegmentLayout layout;
};

SerializedLabel serialize_label(std::string_view prefix_text, const PseudoLabelSet& set,
                                const Tokenizer& tok);

std::vector<double> build_loss_weights(const SegmentLayout& layout, const PseudoLabelSet& set);

/// Row-major L x L bitset, bit (q*L + k) set when query q may attend to key k.
/// Bits are packed least-significant first within each byte.
struct DenseMask {
    std::size_t rows = 0;
    std::vector<std::uint8_t> bits;

    bool at(std::size_t q, std::size_t k) const noexcept {
        const std::size_t idx = q * rows + k;
        return (bits[idx >> 3] >> (idx & 7)) & 1U;
    }
    bool operator==(const DenseMask&) const = default;
};

/// Segment-descriptor form of the mask: the layout plus the attention rule.
class AttentionMask {
public:
    explicit AttentionMask(SegmentLayout layout);

    const SegmentLayout& layout() const noexcept { return layout_; }
    std::size_t size() const noexcept { return layout_.total_len(); }

    /// Causal inside the prefix; a box-span token sees the whole prefix and the
    /// earlier tokens of its own span, never another span.
    bool allows(std::size_t query, std::size_t key) const noexcept;

    DenseMask dense() const;
    DenseMask dense_serial() const;

private:
    /// -1 for prefix positions, otherwise the span index.
    long segment_of(std::size_t pos) const noexcept;

    SegmentLayout layout_;
    std::vector<long> segment_;
};

AttentionMask build_attention_mask(const SegmentLayout& layout);

/// Prefix 0..N-1; every box span repeats span 0's positions. Throws SchemaError
/// when span lengths differ.
std::vector<int> build_position_ids(const SegmentLayout& layout);

struct TrainingArtifact {
    int version = 1;
    std::string tokenizer_id;
    std::size_t prefix_offset = 0;
    std::vector<int> token_ids;
    std::vector<double> loss_weights;
    SegmentLayout layout;
    std::vector<double> segment_weights;  // one per box span
    std::vector<int> position_ids;
    std::optional<DenseMask> dense_mask;
    PseudoLabelSet provenance;

    bool operator==(const TrainingArtifact&) const = default;
};

TrainingArtifact build_artifact(std::string_view prefix_text, const PseudoLabelSet& set,
                                const Tokenizer& tok, std::size_t prefix_offset = 0,
                                bool with_dense_mask = false);

/// Checks every structural invariant; throws SchemaError naming the field.
void validate(const TrainingArtifact& a);

void emit_artifact(const TrainingArtifact& a, const std::filesystem::path& path);
TrainingArtifact read_artifact(const std::filesystem::path& path);

std::string artifact_to_json_string(const TrainingArtifact& a);
TrainingArtifact artifact_from_json_string(std::string_view text);

/// Tokens processed by one concatenated example versus M+1 independent ones.
struct TokenCost {
    std::size_t concatenated = 0;
    std::size_t independent = 0;
    double ratio = 1.0;    // concatenated / independent
    double savings = 0.0;  // 1 - ratio
};

TokenCost token_cost(std::size_t prefix_len, std::size_t span_len, std::size_t num_pseudo);

}  // namespace rvlm
