#include "relfeat/r2n/model.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "relfeat/value.hpp"

namespace relfeat::r2n {

void R2NConfig::validate() const {
    if (cell_size < 1 || fc_output < 1 || ff_hidden_layers < 0 ||
        ff_hidden_size < 1 || max_seq < 1 || batch_size < 1 || max_epochs < 1)
        throw std::invalid_argument("r2n config sizes must be positive");
    if (!(validation_ratio > 0.0 && validation_ratio < 1.0))
        throw std::invalid_argument("validation_ratio must be in (0, 1)");
    if (!(patience_fraction > 0.0))
        throw std::invalid_argument("patience_fraction must be positive");
    if (task == Task::Classification && n_classes < 2)
        throw std::invalid_argument("classification needs >= 2 classes");
}

std::vector<std::pair<std::string, Mat*>> R2NParams::tensors() {
    std::vector<std::pair<std::string, Mat*>> out;
    for (size_t p = 0; p < paths.size(); ++p) {
        std::string prefix = "path" + std::to_string(p) + ".";
        PathParams& pp = paths[p];
        auto push = [&](const std::string& name, Mat& m) {
            if (m.rows > 0 && m.cols > 0) out.emplace_back(prefix + name, &m);
        };
        push("embed_table", pp.embed_table);
        push("embed_w", pp.embed_w);
        push("embed_b", pp.embed_b);
        push("sym_table", pp.sym_table);
        push("seq.wx", pp.seq_cell.wx);
        push("seq.wh", pp.seq_cell.wh);
        push("seq.b", pp.seq_cell.b);
        push("seq.h0", pp.seq_cell.h0);
        push("seq.c0", pp.seq_cell.c0);
        for (size_t d = 0; d < pp.cells.size(); ++d) {
            std::string cp = "cell" + std::to_string(d) + ".";
            push(cp + "wx", pp.cells[d].wx);
            push(cp + "wh", pp.cells[d].wh);
            push(cp + "b", pp.cells[d].b);
            push(cp + "h0", pp.cells[d].h0);
            push(cp + "c0", pp.cells[d].c0);
        }
        push("fc_w", pp.fc_w);
        push("fc_b", pp.fc_b);
    }
    for (size_t l = 0; l < ff_w.size(); ++l) {
        out.emplace_back("ff" + std::to_string(l) + ".w", &ff_w[l]);
        out.emplace_back("ff" + std::to_string(l) + ".b", &ff_b[l]);
    }
    return out;
}

std::vector<std::pair<std::string, const Mat*>> R2NParams::tensors() const {
    auto mutable_list = const_cast<R2NParams*>(this)->tensors();
    std::vector<std::pair<std::string, const Mat*>> out;
    out.reserve(mutable_list.size());
    for (auto& [n, m] : mutable_list) out.emplace_back(n, m);
    return out;
}

namespace {

CellParams make_cell(CellType type, int in_width, int cell, std::mt19937_64& rng) {
    CellParams cp;
    int gate = type == CellType::Lstm ? 4 * cell : cell;
    cp.wx = Mat(in_width, gate);
    cp.wh = Mat(cell, gate);
    cp.b = Mat(1, gate);
    cp.h0 = Mat(1, cell);
    if (type == CellType::Lstm) cp.c0 = Mat(1, cell);
    xavier_fill(cp.wx, rng);
    xavier_fill(cp.wh, rng);
    return cp;  // biases and initial states start at zero
}

}  // namespace

R2NModel init_model(const R2NConfig& config, const std::vector<PathInputSpec>& inputs) {
    config.validate();
    if (inputs.empty()) throw std::invalid_argument("r2n needs at least one input");

    R2NModel model;
    model.config = config;
    model.inputs = inputs;
    std::mt19937_64 rng(config.seed);
    const int cell = config.cell_size;

    int fused_width = 0;
    for (const auto& spec : inputs) {
        PathParams pp;
        int out_width = cell;
        if (spec.leaf == LeafKind::Attributes) {
            if (spec.attr_width < 1)
                throw std::invalid_argument("attribute input needs a width");
            out_width = spec.attr_width;
        } else {
            if (spec.depth < 1) throw std::invalid_argument("path depth must be >= 1");
            if (spec.leaf == LeafKind::Number) {
                pp.embed_w = Mat(1, cell);
                pp.embed_b = Mat(1, cell);
                xavier_fill(pp.embed_w, rng);
            } else if (spec.leaf == LeafKind::Category) {
                pp.embed_table = Mat(static_cast<int>(spec.vocab.size()) + 1, cell);
                xavier_fill(pp.embed_table, rng);
            } else if (spec.leaf == LeafKind::Sequence) {
                pp.sym_table = Mat(static_cast<int>(spec.vocab.size()) + 1, cell);
                xavier_fill(pp.sym_table, rng);
                pp.seq_cell = make_cell(config.cell, cell, cell, rng);
            }
            for (int d = 0; d < spec.depth; ++d)
                pp.cells.push_back(make_cell(config.cell, cell, cell, rng));
        }
        pp.fc_w = Mat(out_width, config.fc_output);
        pp.fc_b = Mat(1, config.fc_output);
        xavier_fill(pp.fc_w, rng);
        fused_width += config.fc_output;
        model.params.paths.push_back(std::move(pp));
    }

    int head_out = config.task == Task::Classification ? config.n_classes : 1;
    int width = fused_width;
    for (int l = 0; l < config.ff_hidden_layers; ++l) {
        Mat w(width, config.ff_hidden_size);
        xavier_fill(w, rng);
        model.params.ff_w.push_back(std::move(w));
        model.params.ff_b.emplace_back(1, config.ff_hidden_size);
        width = config.ff_hidden_size;
    }
    Mat w(width, head_out);
    xavier_fill(w, rng);
    model.params.ff_w.push_back(std::move(w));
    model.params.ff_b.emplace_back(1, head_out);
    return model;
}

Tape::Id TapeBinding::bind(Tape& tape, Mat& tensor) {
    for (const auto& [m, id] : params)
        if (m == &tensor) return id;
    Tape::Id id = tape.input(tensor);
    params.emplace_back(&tensor, id);
    return id;
}

std::vector<int> sort_children(const std::vector<std::vector<double>>& child_vectors,
                               bool ordered) {
    std::vector<int> order(child_vectors.size());
    std::iota(order.begin(), order.end(), 0);
    if (ordered) return order;
    std::vector<double> means(child_vectors.size(), 0.0);
    for (size_t i = 0; i < child_vectors.size(); ++i) {
        for (double x : child_vectors[i]) means[i] += x;
        if (!child_vectors[i].empty())
            means[i] /= static_cast<double>(child_vectors[i].size());
    }
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (means[static_cast<size_t>(a)] != means[static_cast<size_t>(b)])
            return means[static_cast<size_t>(a)] < means[static_cast<size_t>(b)];
        return child_vectors[static_cast<size_t>(a)] < child_vectors[static_cast<size_t>(b)];
    });
    return order;
}

namespace {

struct CellIds {
    Tape::Id wx, wh, b, h0, c0;
};

CellIds bind_cell(Tape& tape, TapeBinding& binding, CellParams& cp, CellType type) {
    CellIds ids;
    ids.wx = binding.bind(tape, cp.wx);
    ids.wh = binding.bind(tape, cp.wh);
    ids.b = binding.bind(tape, cp.b);
    ids.h0 = binding.bind(tape, cp.h0);
    ids.c0 = type == CellType::Lstm ? binding.bind(tape, cp.c0) : -1;
    return ids;
}

struct CellState {
    Tape::Id h, c;
};

CellState initial_state(Tape& tape, const CellIds& ids, CellType type, int rows) {
    CellState s;
    s.h = tape.broadcast_rows(ids.h0, rows);
    s.c = type == CellType::Lstm ? tape.broadcast_rows(ids.c0, rows) : -1;
    return s;
}

CellState cell_step(Tape& tape, const CellIds& ids, CellType type, CellState prev,
                    Tape::Id x, const std::vector<double>* mask, int cell) {
    CellState next;
    Tape::Id z = tape.add_rowvec(
        tape.add(tape.matmul(x, ids.wx), tape.matmul(prev.h, ids.wh)), ids.b);
    if (type == CellType::Lstm) {
        Tape::Id i = tape.sigmoid_op(tape.slice_cols(z, 0, cell));
        Tape::Id f = tape.sigmoid_op(tape.slice_cols(z, cell, 2 * cell));
        Tape::Id g = tape.tanh_op(tape.slice_cols(z, 2 * cell, 3 * cell));
        Tape::Id o = tape.sigmoid_op(tape.slice_cols(z, 3 * cell, 4 * cell));
        Tape::Id c = tape.add(tape.mul(f, prev.c), tape.mul(i, g));
        Tape::Id h = tape.mul(o, tape.tanh_op(c));
        next.c = mask ? tape.mix_rows(c, prev.c, *mask) : c;
        next.h = mask ? tape.mix_rows(h, prev.h, *mask) : h;
    } else {
        Tape::Id h = tape.tanh_op(z);
        next.h = mask ? tape.mix_rows(h, prev.h, *mask) : h;
        next.c = -1;
    }
    return next;
}

// Orders one node's children. Temporal groups keep time order; unordered
// groups sort ascending by output-vector mean. Both keep only the trailing
// max_seq entries (the most recent / the largest means).
std::vector<int> arrange_children(
    const std::vector<int>& indices,
    const std::function<const InputTree::Node&(int)>& record,
    const std::function<const std::vector<double>&(int)>& vector_of, int max_seq) {
    bool ordered = !indices.empty();
    for (int i : indices)
        if (!record(i).has_time) ordered = false;

    std::vector<int> arranged;
    if (ordered) {
        arranged = indices;
        std::stable_sort(arranged.begin(), arranged.end(), [&](int a, int b) {
            return record(a).sort_key < record(b).sort_key;
        });
    } else {
        std::vector<std::vector<double>> vals;
        vals.reserve(indices.size());
        for (int i : indices) vals.push_back(vector_of(i));
        std::vector<int> perm = sort_children(vals, false);
        arranged.reserve(indices.size());
        for (int p : perm) arranged.push_back(indices[static_cast<size_t>(p)]);
    }
    if (static_cast<int>(arranged.size()) > max_seq)
        arranged.erase(arranged.begin(), arranged.end() - max_seq);
    return arranged;
}

// Embeds the deepest level's leaves of several trees in one pass. Returns
// the stacked output node plus per-tree row offsets, or nullopt when the
// trees carry no leaves at all.
std::optional<Tape::Id> embed_leaves(Tape& tape, TapeBinding& binding,
                                     R2NModel& model, size_t path_index,
                                     const std::vector<const InputTree*>& trees,
                                     std::vector<int>& tree_offset) {
    const PathInputSpec& spec = model.inputs[path_index];
    PathParams& pp = model.params.paths[path_index];
    const int cell = model.config.cell_size;

    tree_offset.assign(trees.size() + 1, 0);
    int total = 0;
    for (size_t t = 0; t < trees.size(); ++t) {
        tree_offset[t] = total;
        total += static_cast<int>(trees[t]->levels.back().size());
    }
    tree_offset[trees.size()] = total;
    if (total == 0) return std::nullopt;

    if (spec.leaf == LeafKind::Number) {
        Mat values(total, 1);
        int at = 0;
        double sd = spec.value_std > 0 ? spec.value_std : 1.0;
        for (const InputTree* t : trees)
            for (double v : t->leaf_numbers)
                values.at(at++, 0) = (v - spec.value_mean) / sd;
        Tape::Id x = tape.input(std::move(values));
        return tape.add_rowvec(tape.matmul(x, binding.bind(tape, pp.embed_w)),
                               binding.bind(tape, pp.embed_b));
    }
    if (spec.leaf == LeafKind::Category) {
        Tape::Id table = binding.bind(tape, pp.embed_table);
        std::vector<Tape::RowRef> refs;
        refs.reserve(static_cast<size_t>(total));
        for (const InputTree* t : trees)
            for (int s : t->leaf_symbols) refs.push_back({table, s});
        return tape.stack_rows(refs);
    }
    // Sequence leaves: the embedder cell runs over all leaf sequences at
    // once, padded with the OOV row and masked.
    Tape::Id table = binding.bind(tape, pp.sym_table);
    CellIds ids = bind_cell(tape, binding, pp.seq_cell, model.config.cell);
    const int oov = static_cast<int>(spec.vocab.size());
    std::vector<std::vector<int>> seqs;
    seqs.reserve(static_cast<size_t>(total));
    for (const InputTree* t : trees)
        for (const auto& s : t->leaf_sequences) {
            std::vector<int> trimmed = s;
            if (static_cast<int>(trimmed.size()) > model.config.max_seq)
                trimmed.erase(trimmed.begin(), trimmed.end() - model.config.max_seq);
            seqs.push_back(std::move(trimmed));
        }
    int max_len = 0;
    for (const auto& s : seqs) max_len = std::max(max_len, static_cast<int>(s.size()));
    CellState state = initial_state(tape, ids, model.config.cell, total);
    for (int step = 0; step < max_len; ++step) {
        std::vector<Tape::RowRef> refs(seqs.size());
        std::vector<double> mask(seqs.size());
        for (size_t i = 0; i < seqs.size(); ++i) {
            bool live = step < static_cast<int>(seqs[i].size());
            refs[i] = {table, live ? seqs[i][static_cast<size_t>(step)] : oov};
            mask[i] = live ? 1.0 : 0.0;
        }
        Tape::Id x = tape.stack_rows(refs);
        state = cell_step(tape, ids, model.config.cell, state, x, &mask, cell);
    }
    return state.h;
}

}  // namespace

Tape::Id eval_batch(Tape& tape, TapeBinding& binding, R2NModel& model,
                    size_t path_index, const std::vector<const InputTree*>& trees) {
    const PathInputSpec& spec = model.inputs[path_index];
    PathParams& pp = model.params.paths[path_index];
    const int cell = model.config.cell_size;
    const int n_trees = static_cast<int>(trees.size());
    if (n_trees == 0) throw std::invalid_argument("eval_batch of zero trees");

    if (spec.leaf == LeafKind::Attributes) {
        Mat rows(n_trees, spec.attr_width);
        for (int t = 0; t < n_trees; ++t)
            for (int j = 0; j < spec.attr_width; ++j)
                rows.at(t, j) =
                    trees[static_cast<size_t>(t)]->attributes[static_cast<size_t>(j)];
        return tape.input(std::move(rows));
    }

    const size_t depth = static_cast<size_t>(spec.depth);
    std::vector<int> child_offset;
    std::optional<Tape::Id> child_out =
        embed_leaves(tape, binding, model, path_index, trees, child_offset);

    for (size_t lvl = depth; lvl-- > 0;) {
        CellIds ids = bind_cell(tape, binding, pp.cells[lvl], model.config.cell);

        std::vector<int> parent_offset(trees.size() + 1, 0);
        int n_parents = 0;
        for (size_t t = 0; t < trees.size(); ++t) {
            parent_offset[t] = n_parents;
            n_parents +=
                lvl == 0 ? 1 : static_cast<int>(trees[t]->levels[lvl - 1].size());
        }
        parent_offset[trees.size()] = n_parents;

        // Child nodes (tree depth lvl+1) grouped under global parent index.
        std::vector<std::vector<int>> children_of(static_cast<size_t>(n_parents));
        std::vector<const InputTree::Node*> child_record(
            child_offset.empty() ? 0 : static_cast<size_t>(child_offset.back()));
        for (size_t t = 0; t < trees.size(); ++t) {
            const auto& nodes = trees[t]->levels[lvl];
            for (size_t i = 0; i < nodes.size(); ++i) {
                int global = child_offset[t] + static_cast<int>(i);
                int parent = lvl == 0 ? parent_offset[t]
                                      : parent_offset[t] + nodes[i].parent;
                children_of[static_cast<size_t>(parent)].push_back(global);
                child_record[static_cast<size_t>(global)] = &nodes[i];
            }
        }

        std::vector<std::vector<double>> child_vectors;
        if (child_out) {
            const Mat& m = tape.value(*child_out);
            child_vectors.resize(static_cast<size_t>(m.rows));
            for (int i = 0; i < m.rows; ++i)
                child_vectors[static_cast<size_t>(i)].assign(
                    m.a.begin() + static_cast<long>(i) * m.cols,
                    m.a.begin() + static_cast<long>(i + 1) * m.cols);
        }

        std::vector<std::vector<int>> arranged(static_cast<size_t>(n_parents));
        int max_len = 0;
        for (int p = 0; p < n_parents; ++p) {
            const auto& kids = children_of[static_cast<size_t>(p)];
            if (kids.empty()) continue;
            arranged[static_cast<size_t>(p)] = arrange_children(
                kids,
                [&](int g) -> const InputTree::Node& {
                    return *child_record[static_cast<size_t>(g)];
                },
                [&](int g) -> const std::vector<double>& {
                    return child_vectors[static_cast<size_t>(g)];
                },
                model.config.max_seq);
            max_len = std::max(
                max_len, static_cast<int>(arranged[static_cast<size_t>(p)].size()));
        }

        CellState state = initial_state(tape, ids, model.config.cell, n_parents);
        if (child_out && max_len > 0) {
            for (int step = 0; step < max_len; ++step) {
                std::vector<Tape::RowRef> refs(static_cast<size_t>(n_parents));
                std::vector<double> mask(static_cast<size_t>(n_parents));
                for (int p = 0; p < n_parents; ++p) {
                    const auto& seq = arranged[static_cast<size_t>(p)];
                    bool live = step < static_cast<int>(seq.size());
                    refs[static_cast<size_t>(p)] = {
                        *child_out, live ? seq[static_cast<size_t>(step)] : 0};
                    mask[static_cast<size_t>(p)] = live ? 1.0 : 0.0;
                }
                Tape::Id x = tape.stack_rows(refs);
                state = cell_step(tape, ids, model.config.cell, state, x, &mask, cell);
            }
        }
        child_out = state.h;
        child_offset = std::move(parent_offset);
    }
    return *child_out;
}

Tape::Id eval_tree(Tape& tape, TapeBinding& binding, R2NModel& model,
                   size_t path_index, const InputTree& tree) {
    const PathInputSpec& spec = model.inputs[path_index];
    PathParams& pp = model.params.paths[path_index];
    const int cell = model.config.cell_size;

    if (spec.leaf == LeafKind::Attributes) {
        Mat row(1, spec.attr_width);
        for (int j = 0; j < spec.attr_width; ++j)
            row.at(0, j) = tree.attributes[static_cast<size_t>(j)];
        return tape.input(std::move(row));
    }

    const size_t depth = static_cast<size_t>(spec.depth);

    // Leaf embeddings, one node at a time; the recursion then mirrors the
    // per-node definition directly.
    std::vector<Tape::Id> child_ids;
    const auto& deepest = tree.levels.back();
    for (size_t i = 0; i < deepest.size(); ++i) {
        if (spec.leaf == LeafKind::Number) {
            double sd = spec.value_std > 0 ? spec.value_std : 1.0;
            Mat v(1, 1);
            v.at(0, 0) = (tree.leaf_numbers[i] - spec.value_mean) / sd;
            Tape::Id x = tape.input(std::move(v));
            child_ids.push_back(
                tape.add_rowvec(tape.matmul(x, binding.bind(tape, pp.embed_w)),
                                binding.bind(tape, pp.embed_b)));
        } else if (spec.leaf == LeafKind::Category) {
            Tape::Id table = binding.bind(tape, pp.embed_table);
            child_ids.push_back(tape.stack_rows({{table, tree.leaf_symbols[i]}}));
        } else {
            Tape::Id table = binding.bind(tape, pp.sym_table);
            CellIds ids = bind_cell(tape, binding, pp.seq_cell, model.config.cell);
            std::vector<int> seq = tree.leaf_sequences[i];
            if (static_cast<int>(seq.size()) > model.config.max_seq)
                seq.erase(seq.begin(), seq.end() - model.config.max_seq);
            CellState state = initial_state(tape, ids, model.config.cell, 1);
            for (int s : seq) {
                Tape::Id x = tape.stack_rows({{table, s}});
                state = cell_step(tape, ids, model.config.cell, state, x, nullptr, cell);
            }
            child_ids.push_back(state.h);
        }
    }

    for (size_t lvl = depth; lvl-- > 0;) {
        CellIds ids = bind_cell(tape, binding, pp.cells[lvl], model.config.cell);
        size_t n_parents = lvl == 0 ? 1 : tree.levels[lvl - 1].size();
        const auto& level_nodes = tree.levels[lvl];

        std::vector<std::vector<int>> children_of(n_parents);
        for (size_t i = 0; i < level_nodes.size(); ++i) {
            size_t parent = lvl == 0 ? 0 : static_cast<size_t>(level_nodes[i].parent);
            children_of[parent].push_back(static_cast<int>(i));
        }

        std::vector<std::vector<double>> child_vectors(level_nodes.size());
        for (size_t i = 0; i < level_nodes.size(); ++i)
            child_vectors[i] = tape.value(child_ids[i]).a;

        std::vector<Tape::Id> parent_ids(n_parents);
        for (size_t p = 0; p < n_parents; ++p) {
            std::vector<int> order = arrange_children(
                children_of[p],
                [&](int i) -> const InputTree::Node& {
                    return level_nodes[static_cast<size_t>(i)];
                },
                [&](int i) -> const std::vector<double>& {
                    return child_vectors[static_cast<size_t>(i)];
                },
                model.config.max_seq);
            CellState state = initial_state(tape, ids, model.config.cell, 1);
            for (int idx : order)
                state = cell_step(tape, ids, model.config.cell, state,
                                  child_ids[static_cast<size_t>(idx)], nullptr, cell);
            parent_ids[p] = state.h;
        }
        child_ids = std::move(parent_ids);
    }
    return child_ids[0];
}

Tape::Id fuse_paths(Tape& tape, TapeBinding& binding, R2NModel& model,
                    const std::vector<Tape::Id>& per_path_outputs) {
    std::vector<Tape::Id> projected;
    projected.reserve(per_path_outputs.size());
    for (size_t p = 0; p < per_path_outputs.size(); ++p) {
        PathParams& pp = model.params.paths[p];
        projected.push_back(tape.add_rowvec(
            tape.matmul(per_path_outputs[p], binding.bind(tape, pp.fc_w)),
            binding.bind(tape, pp.fc_b)));
    }
    Tape::Id x = projected.size() == 1 ? projected[0] : tape.concat_cols(projected);

    for (size_t l = 0; l < model.params.ff_w.size(); ++l) {
        x = tape.add_rowvec(
            tape.matmul(x, binding.bind(tape, model.params.ff_w[l])),
            binding.bind(tape, model.params.ff_b[l]));
        if (l + 1 < model.params.ff_w.size()) x = tape.relu_op(x);
    }
    return x;
}

Mat predict(R2NModel& model,
            const std::vector<std::vector<const InputTree*>>& per_path_trees) {
    Tape tape;
    TapeBinding binding;
    std::vector<Tape::Id> outs;
    for (size_t p = 0; p < model.inputs.size(); ++p)
        outs.push_back(eval_batch(tape, binding, model, p, per_path_trees[p]));
    Tape::Id head = fuse_paths(tape, binding, model, outs);
    if (model.config.task == Task::Classification)
        return Tape::softmax(tape.value(head));
    return tape.value(head);
}

// ---------------------------------------------------------------------------

namespace {

std::string escape_token(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '\\') out += "\\\\";
        else if (c == '\n') out += "\\n";
        else if (c == '\r') out += "\\r";
        else out.push_back(c);
    }
    return out;
}

std::string unescape_token(const std::string& s) {
    std::string out;
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\' && i + 1 < s.size()) {
            char c = s[++i];
            if (c == 'n') out.push_back('\n');
            else if (c == 'r') out.push_back('\r');
            else out.push_back(c);
        } else {
            out.push_back(s[i]);
        }
    }
    return out;
}

const char* leaf_name(LeafKind k) {
    switch (k) {
    case LeafKind::Number: return "number";
    case LeafKind::Category: return "category";
    case LeafKind::Sequence: return "sequence";
    case LeafKind::Attributes: return "attributes";
    }
    return "?";
}

LeafKind leaf_from(const std::string& s) {
    if (s == "number") return LeafKind::Number;
    if (s == "category") return LeafKind::Category;
    if (s == "sequence") return LeafKind::Sequence;
    if (s == "attributes") return LeafKind::Attributes;
    throw std::runtime_error("bad leaf kind in checkpoint: " + s);
}

}  // namespace

std::string save_model(const R2NModel& model) {
    std::ostringstream text;
    const R2NConfig& c = model.config;
    char buf[48];
    auto real = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    text << "cell_size = " << c.cell_size << "\n"
         << "fc_output = " << c.fc_output << "\n"
         << "ff_hidden_layers = " << c.ff_hidden_layers << "\n"
         << "ff_hidden_size = " << c.ff_hidden_size << "\n"
         << "max_seq = " << c.max_seq << "\n"
         << "learning_rate = " << real(c.learning_rate) << "\n"
         << "validation_ratio = " << real(c.validation_ratio) << "\n"
         << "patience_fraction = " << real(c.patience_fraction) << "\n"
         << "batch_size = " << c.batch_size << "\n"
         << "max_epochs = " << c.max_epochs << "\n"
         << "seed = " << c.seed << "\n"
         << "task = " << (c.task == Task::Regression ? "regression" : "classification")
         << "\n"
         << "cell = " << (c.cell == CellType::Lstm ? "lstm" : "simple_rnn") << "\n"
         << "n_classes = " << c.n_classes << "\n";
    for (const auto& spec : model.inputs) {
        text << "input = " << escape_token(spec.name) << "\n"
             << "input_depth = " << spec.depth << "\n"
             << "input_leaf = " << leaf_name(spec.leaf) << "\n"
             << "input_mean = " << real(spec.value_mean) << "\n"
             << "input_std = " << real(spec.value_std) << "\n"
             << "input_attr_width = " << spec.attr_width << "\n";
        for (const auto& v : spec.vocab)
            text << "input_vocab = " << escape_token(v) << "\n";
    }

    std::string header = text.str();
    std::string out = "R2N1";
    uint64_t len = header.size();
    char lenbuf[8];
    std::memcpy(lenbuf, &len, 8);
    out.append(lenbuf, 8);
    out += header;

    for (const auto& [name, mat] : model.params.tensors()) {
        out.append(reinterpret_cast<const char*>(mat->a.data()),
                   mat->a.size() * sizeof(double));
    }
    return out;
}

R2NModel load_model(const std::string& bytes) {
    if (bytes.size() < 12 || bytes.compare(0, 4, "R2N1") != 0)
        throw std::runtime_error("not an r2n checkpoint");
    uint64_t len = 0;
    std::memcpy(&len, bytes.data() + 4, 8);
    if (bytes.size() < 12 + len) throw std::runtime_error("truncated checkpoint header");
    std::string header = bytes.substr(12, len);

    R2NConfig config;
    std::vector<PathInputSpec> inputs;
    std::istringstream in(header);
    std::string line;
    while (std::getline(in, line)) {
        size_t eq = line.find(" = ");
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 3);
        auto as_int = [&]() { return std::stoi(value); };
        auto as_real = [&]() { return std::stod(value); };
        if (key == "cell_size") config.cell_size = as_int();
        else if (key == "fc_output") config.fc_output = as_int();
        else if (key == "ff_hidden_layers") config.ff_hidden_layers = as_int();
        else if (key == "ff_hidden_size") config.ff_hidden_size = as_int();
        else if (key == "max_seq") config.max_seq = as_int();
        else if (key == "learning_rate") config.learning_rate = as_real();
        else if (key == "validation_ratio") config.validation_ratio = as_real();
        else if (key == "patience_fraction") config.patience_fraction = as_real();
        else if (key == "batch_size") config.batch_size = as_int();
        else if (key == "max_epochs") config.max_epochs = as_int();
        else if (key == "seed") config.seed = std::stoull(value);
        else if (key == "task")
            config.task = value == "regression" ? Task::Regression : Task::Classification;
        else if (key == "cell")
            config.cell = value == "simple_rnn" ? CellType::SimpleRnn : CellType::Lstm;
        else if (key == "n_classes") config.n_classes = as_int();
        else if (key == "input") {
            PathInputSpec spec;
            spec.name = unescape_token(value);
            inputs.push_back(spec);
        } else if (key == "input_depth") inputs.back().depth = as_int();
        else if (key == "input_leaf") inputs.back().leaf = leaf_from(value);
        else if (key == "input_mean") inputs.back().value_mean = as_real();
        else if (key == "input_std") inputs.back().value_std = as_real();
        else if (key == "input_attr_width") inputs.back().attr_width = as_int();
        else if (key == "input_vocab") inputs.back().vocab.push_back(unescape_token(value));
        else throw std::runtime_error("unknown checkpoint key: " + key);
    }

    R2NModel model = init_model(config, inputs);
    size_t at = 12 + len;
    for (auto& [name, mat] : model.params.tensors()) {
        size_t need = mat->a.size() * sizeof(double);
        if (bytes.size() < at + need)
            throw std::runtime_error("truncated checkpoint tensor: " + name);
        std::memcpy(mat->a.data(), bytes.data() + at, need);
        at += need;
    }
    if (at != bytes.size()) throw std::runtime_error("trailing bytes in checkpoint");
    return model;
}

}  // namespace relfeat::r2n
