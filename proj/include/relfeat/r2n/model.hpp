#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "relfeat/r2n/tape.hpp"
#include "relfeat/schema.hpp"

namespace relfeat::r2n {

enum class CellType : uint8_t { SimpleRnn, Lstm };
enum class LeafKind : uint8_t { Number, Category, Sequence, Attributes };

struct R2NConfig {
    int cell_size = 18;
    int fc_output = 10;
    int ff_hidden_layers = 1;
    int ff_hidden_size = 1024;
    int max_seq = 50;
    double learning_rate = 0.01;
    double validation_ratio = 0.10;
    double patience_fraction = 0.25;
    int batch_size = 32;
    int max_epochs = 200;
    uint64_t seed = 42;
    Task task = Task::Classification;
    CellType cell = CellType::Lstm;
    int n_classes = 2;

    // Conference-table sizes shrink to something a workstation can train.
    void apply_desk_scale() {
        ff_hidden_size = 64;
        batch_size = 32;
    }
    void validate() const;
};

// Static structure of one joining path's input.
struct PathInputSpec {
    std::string name;         // canonical path string or attribute block name
    int depth = 1;            // number of cell levels (k)
    LeafKind leaf = LeafKind::Number;
    std::vector<std::string> vocab;  // Category levels / Sequence symbols
    double value_mean = 0.0;         // numeric leaf standardization
    double value_std = 1.0;
    int attr_width = 0;  // LeafKind::Attributes only
};

// One example's materialized tree for a path. levels[j] holds parent links
// into levels[j-1] (level 0 parents are all 0 = the root). The deepest
// level's nodes carry the leaf payloads.
struct InputTree {
    struct Node {
        int32_t parent;
        double sort_key;  // timestamp when time-ordered
        bool has_time;
    };
    std::vector<std::vector<Node>> levels;
    // Parallel to levels.back(); exactly one populated per LeafKind.
    std::vector<double> leaf_numbers;
    std::vector<int> leaf_symbols;                 // vocab index, OOV = vocab size
    std::vector<std::vector<int>> leaf_sequences;  // per leaf, vocab indices
    std::vector<double> attributes;                // LeafKind::Attributes row
};

struct CellParams {
    Mat wx, wh, b, h0, c0;  // c0 used by LSTM only
};

struct PathParams {
    Mat embed_table;        // Category: (vocab + 1) x cell
    Mat embed_w, embed_b;   // Number: 1 x cell affine
    Mat sym_table;          // Sequence symbols: (vocab + 1) x cell
    CellParams seq_cell;    // Sequence leaf embedder
    std::vector<CellParams> cells;  // cells[d] shared by all nodes at depth d
    Mat fc_w, fc_b;         // path output -> fc_output
};

struct R2NParams {
    std::vector<PathParams> paths;
    std::vector<Mat> ff_w, ff_b;  // hidden layers then the output layer

    // Tensors in declaration order (checkpoint and trainer order).
    std::vector<std::pair<std::string, Mat*>> tensors();
    std::vector<std::pair<std::string, const Mat*>> tensors() const;
};

struct R2NModel {
    R2NConfig config;
    std::vector<PathInputSpec> inputs;
    R2NParams params;
};

R2NModel init_model(const R2NConfig& config, const std::vector<PathInputSpec>& inputs);

// ---------------------------------------------------------------------------
// Evaluation. Both evaluators register parameters on the caller's tape and
// return per-path representation nodes; fuse_paths builds the head.

struct TapeBinding {
    // Parameter tensor -> tape id, in declaration order.
    std::vector<std::pair<Mat*, Tape::Id>> params;
    Tape::Id bind(Tape& tape, Mat& tensor);
};

// Mean-value child ordering for unordered collections; temporal order
// (sort_key) is preserved when present. Ties break lexicographically.
std::vector<int> sort_children(const std::vector<std::vector<double>>& child_vectors,
                               bool ordered);

// Naive per-tree recursion; the reference path.
Tape::Id eval_tree(Tape& tape, TapeBinding& binding, R2NModel& model,
                   size_t path_index, const InputTree& tree);

// Depth-batched evaluation of many trees of one path: all nodes of a depth
// run through the shared cell in one padded pass. Output row e is tree e's
// root representation.
Tape::Id eval_batch(Tape& tape, TapeBinding& binding, R2NModel& model,
                    size_t path_index, const std::vector<const InputTree*>& trees);

// Per-path FC, concatenation and the feed-forward head. Returns logits
// (classification, n x n_classes) or predictions (regression, n x 1).
Tape::Id fuse_paths(Tape& tape, TapeBinding& binding, R2NModel& model,
                    const std::vector<Tape::Id>& per_path_outputs);

// Forward-only batched prediction: softmax probabilities or raw outputs.
Mat predict(R2NModel& model,
            const std::vector<std::vector<const InputTree*>>& per_path_trees);

// ---------------------------------------------------------------------------
// Checkpoint container: magic "R2N1", canonical config text, then raw
// row-major little-endian doubles in tensor declaration order.

std::string save_model(const R2NModel& model);
R2NModel load_model(const std::string& bytes);

}  // namespace relfeat::r2n
