#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "relfeat/r2n/theory.hpp"
#include "relfeat/r2n/train.hpp"
#include "support/synthetic.hpp"

using namespace relfeat;
using namespace relfeat::r2n;

namespace {

R2NConfig tiny_config(CellType cell = CellType::Lstm) {
    R2NConfig c;
    c.cell_size = 3;
    c.fc_output = 4;
    c.ff_hidden_layers = 1;
    c.ff_hidden_size = 8;
    c.max_seq = 50;
    c.batch_size = 8;
    c.n_classes = 2;
    c.cell = cell;
    c.seed = 20240501;
    return c;
}

std::vector<PathInputSpec> two_path_inputs() {
    PathInputSpec numeric;
    numeric.name = "p0";
    numeric.depth = 2;
    numeric.leaf = LeafKind::Number;
    PathInputSpec categorical;
    categorical.name = "p1";
    categorical.depth = 1;
    categorical.leaf = LeafKind::Category;
    categorical.vocab = {"a", "b", "c"};
    return {numeric, categorical};
}

double rel_err(double a, double b) {
    return std::fabs(a - b) / std::max({1.0, std::fabs(a), std::fabs(b)});
}

}  // namespace

TEST_CASE("sort_children: the documented mean-sort with lexicographic ties") {
    std::vector<std::vector<double>> vs = {{3, 1}, {0, 0}, {2, 2}};
    std::vector<int> order = sort_children(vs, false);
    CHECK(order == std::vector<int>{1, 2, 0});  // [[0,0],[2,2],[3,1]]

    // temporal order preserved as given
    CHECK(sort_children(vs, true) == std::vector<int>{0, 1, 2});

    std::vector<std::vector<double>> one = {{5, 5}};
    CHECK(sort_children(one, false) == std::vector<int>{0});
}

TEST_CASE("categorical embedding is a deterministic lookup with an OOV row") {
    R2NConfig config = tiny_config();
    PathInputSpec spec;
    spec.name = "p";
    spec.depth = 1;
    spec.leaf = LeafKind::Category;
    spec.vocab = {"red", "green"};
    R2NModel model = init_model(config, {spec});

    auto embed_one = [&](int symbol) {
        InputTree tree;
        tree.levels.resize(1);
        tree.levels[0].push_back({0, 0.0, false});
        tree.leaf_symbols.push_back(symbol);
        Tape tape;
        TapeBinding binding;
        Tape::Id out = eval_tree(tape, binding, model, 0, tree);
        return tape.value(out).a;
    };
    CHECK(embed_one(0) == embed_one(0));        // "red" twice
    CHECK(embed_one(0) != embed_one(1));
    CHECK(embed_one(2) == embed_one(2));        // OOV row, not an error
}

TEST_CASE("sequence embedder consumes the most recent max_seq symbols") {
    R2NConfig config = tiny_config();
    config.max_seq = 4;
    PathInputSpec spec;
    spec.name = "p";
    spec.depth = 1;
    spec.leaf = LeafKind::Sequence;
    spec.vocab = {"x", "y"};
    R2NModel model = init_model(config, {spec});

    auto run = [&](std::vector<int> seq) {
        InputTree tree;
        tree.levels.resize(1);
        tree.levels[0].push_back({0, 0.0, false});
        tree.leaf_sequences.push_back(std::move(seq));
        Tape tape;
        TapeBinding binding;
        return tape.value(eval_tree(tape, binding, model, 0, tree)).a;
    };
    // a long prefix must not matter once truncated to the trailing 4
    CHECK(run({0, 0, 0, 1, 0, 1, 1}) == run({1, 0, 1, 1}));
    CHECK(run({0, 1}) != run({1, 0}));
}

TEST_CASE("empty trees evaluate to the learned initial state") {
    R2NConfig config = tiny_config();
    PathInputSpec spec;
    spec.name = "p";
    spec.depth = 2;
    spec.leaf = LeafKind::Number;
    R2NModel model = init_model(config, {spec});
    // make h0 visible
    model.params.paths[0].cells[0].h0.a = {0.25, -0.5, 0.75};

    InputTree empty;
    empty.levels.resize(2);
    Tape tape;
    TapeBinding binding;
    Tape::Id out = eval_tree(tape, binding, model, 0, empty);
    CHECK(tape.value(out).a == std::vector<double>{0.25, -0.5, 0.75});
}

TEST_CASE("duplicating a child subtree changes the representation") {
    R2NConfig config = tiny_config();
    PathInputSpec spec;
    spec.name = "p";
    spec.depth = 1;
    spec.leaf = LeafKind::Number;
    R2NModel model = init_model(config, {spec});

    InputTree once;
    once.levels.resize(1);
    once.levels[0].push_back({0, 0.0, false});
    once.leaf_numbers = {0.7};

    InputTree twice = once;
    twice.levels[0].push_back({0, 0.0, false});
    twice.leaf_numbers.push_back(0.7);

    Tape tape;
    TapeBinding binding;
    auto a = tape.value(eval_tree(tape, binding, model, 0, once)).a;
    auto b = tape.value(eval_tree(tape, binding, model, 0, twice)).a;
    CHECK(a != b);
}

TEST_CASE("unordered collections are permutation-invariant bit for bit") {
    R2NConfig config = tiny_config();
    PathInputSpec spec;
    spec.name = "p";
    spec.depth = 1;
    spec.leaf = LeafKind::Number;
    R2NModel model = init_model(config, {spec});

    InputTree tree;
    tree.levels.resize(1);
    std::vector<double> values = {0.9, -0.3, 0.1, 0.5};
    for (double v : values) {
        tree.levels[0].push_back({0, 0.0, false});
        tree.leaf_numbers.push_back(v);
    }
    Tape tape;
    TapeBinding binding;
    auto base = tape.value(eval_tree(tape, binding, model, 0, tree)).a;

    std::mt19937_64 rng(4);
    for (int t = 0; t < 10; ++t) {
        std::shuffle(tree.leaf_numbers.begin(), tree.leaf_numbers.end(), rng);
        Tape tape2;
        TapeBinding binding2;
        auto shuffled = tape2.value(eval_tree(tape2, binding2, model, 0, tree)).a;
        CHECK(shuffled == base);
    }
}

TEST_CASE("a two-level chain matches a hand-written recurrence") {
    R2NConfig config = tiny_config(CellType::SimpleRnn);
    config.cell_size = 2;
    PathInputSpec spec;
    spec.name = "p";
    spec.depth = 2;
    spec.leaf = LeafKind::Number;
    R2NModel model = init_model(config, {spec});

    auto& pp = model.params.paths[0];
    pp.embed_w.a = {0.5, -0.25};
    pp.embed_b.a = {0.1, 0.2};
    for (int d = 0; d < 2; ++d) {
        pp.cells[static_cast<size_t>(d)].wx.a = {0.3, -0.1, 0.2, 0.4};
        pp.cells[static_cast<size_t>(d)].wh.a = {0.05, 0.15, -0.2, 0.1};
        pp.cells[static_cast<size_t>(d)].b.a = {0.01, -0.02};
        pp.cells[static_cast<size_t>(d)].h0.a = {0.0, 0.0};
    }

    // one order node with one leaf carrying x = 0.8
    InputTree tree;
    tree.levels.resize(2);
    tree.levels[0].push_back({0, 0.0, false});
    tree.levels[1].push_back({0, 0.0, false});
    tree.leaf_numbers = {0.8};

    // independent unroll of the same simple-RNN recurrence
    double e0 = 0.8 * 0.5 + 0.1;
    double e1 = 0.8 * -0.25 + 0.2;
    auto step = [](double x0, double x1) {
        double z0 = x0 * 0.3 + x1 * 0.2 + 0.01;
        double z1 = x0 * -0.1 + x1 * 0.4 - 0.02;
        return std::pair{std::tanh(z0), std::tanh(z1)};
    };
    auto [m0, m1] = step(e0, e1);
    auto [r0, r1] = step(m0, m1);

    Tape tape;
    TapeBinding binding;
    auto got = tape.value(eval_tree(tape, binding, model, 0, tree)).a;
    CHECK(got[0] == doctest::Approx(r0).epsilon(1e-15));
    CHECK(got[1] == doctest::Approx(r1).epsilon(1e-15));
}

TEST_CASE("a batch of one equals the naive recursion exactly") {
    R2NConfig config = tiny_config();
    PathInputSpec spec;
    spec.name = "p";
    spec.depth = 2;
    spec.leaf = LeafKind::Number;
    R2NModel model = init_model(config, {spec});

    std::mt19937_64 rng(21);
    InputTree tree = synthetic::random_tree(rng, 2, 4, LeafKind::Number, 0, false);
    Tape t1, t2;
    TapeBinding b1, b2;
    auto batched = t1.value(eval_batch(t1, b1, model, 0, {&tree})).a;
    auto naive = t2.value(eval_tree(t2, b2, model, 0, tree)).a;
    CHECK(batched == naive);
}

TEST_CASE("batched evaluation matches naive recursion over random batches") {
    for (CellType cell : {CellType::Lstm, CellType::SimpleRnn}) {
        R2NConfig config = tiny_config(cell);
        config.max_seq = 5;  // force truncation paths too
        for (LeafKind leaf : {LeafKind::Number, LeafKind::Category, LeafKind::Sequence}) {
            PathInputSpec spec;
            spec.name = "p";
            spec.depth = 2;
            spec.leaf = leaf;
            if (leaf != LeafKind::Number) spec.vocab = {"a", "b", "c", "d"};
            R2NModel model = init_model(config, {spec});

            std::mt19937_64 rng(77 + static_cast<int>(leaf));
            std::vector<InputTree> trees;
            for (int i = 0; i < 12; ++i)
                trees.push_back(synthetic::random_tree(rng, 2, 4, leaf, 4, i % 3 == 0));

            std::vector<const InputTree*> ptrs;
            for (const auto& t : trees) ptrs.push_back(&t);

            Tape tape;
            TapeBinding binding;
            Tape::Id batched = eval_batch(tape, binding, model, 0, ptrs);
            const Mat& B = tape.value(batched);
            for (size_t i = 0; i < trees.size(); ++i) {
                Tape tape2;
                TapeBinding binding2;
                auto naive = tape2.value(eval_tree(tape2, binding2, model, 0, trees[i])).a;
                for (int j = 0; j < B.cols; ++j)
                    CHECK(std::fabs(B.at(static_cast<int>(i), j) -
                                    naive[static_cast<size_t>(j)]) <= 1e-6);
            }
        }
    }
}

TEST_CASE("classification head is a probability simplex") {
    R2NConfig config = tiny_config();
    R2NModel model = init_model(config, two_path_inputs());
    std::mt19937_64 rng(5);
    std::vector<InputTree> p0, p1;
    for (int i = 0; i < 6; ++i) {
        p0.push_back(synthetic::random_tree(rng, 2, 3, LeafKind::Number, 0, false));
        p1.push_back(synthetic::random_tree(rng, 1, 3, LeafKind::Category, 3, false));
    }
    std::vector<std::vector<const InputTree*>> batches(2);
    for (const auto& t : p0) batches[0].push_back(&t);
    for (const auto& t : p1) batches[1].push_back(&t);

    Mat probs = predict(model, batches);
    REQUIRE(probs.rows == 6);
    REQUIRE(probs.cols == 2);
    for (int i = 0; i < probs.rows; ++i) {
        double sum = 0;
        for (int j = 0; j < probs.cols; ++j) {
            CHECK(probs.at(i, j) >= 0.0);
            sum += probs.at(i, j);
        }
        CHECK(std::fabs(sum - 1.0) <= 1e-9);
    }
}

TEST_CASE("zeroing a path's FC weights makes the output ignore that path") {
    R2NConfig config = tiny_config();
    R2NModel model = init_model(config, two_path_inputs());
    model.params.paths[1].fc_w = Mat(model.params.paths[1].fc_w.rows,
                                     model.params.paths[1].fc_w.cols);
    model.params.paths[1].fc_b = Mat(1, config.fc_output);

    std::mt19937_64 rng(6);
    InputTree fixed = synthetic::random_tree(rng, 2, 3, LeafKind::Number, 0, false);
    InputTree cat_a = synthetic::random_tree(rng, 1, 3, LeafKind::Category, 3, false);
    InputTree cat_b = synthetic::random_tree(rng, 1, 3, LeafKind::Category, 3, false);

    auto run = [&](const InputTree& varies) {
        std::vector<std::vector<const InputTree*>> batches(2);
        batches[0].push_back(&fixed);
        batches[1].push_back(&varies);
        return predict(model, batches).a;
    };
    CHECK(run(cat_a) == run(cat_b));
}

TEST_CASE("gradients match central finite differences on the two-path fixture") {
    R2NConfig config = tiny_config();
    R2NModel model = init_model(config, two_path_inputs());

    std::mt19937_64 rng(909);
    std::vector<InputTree> p0, p1;
    for (int i = 0; i < 4; ++i) {
        p0.push_back(synthetic::random_tree(rng, 2, 3, LeafKind::Number, 0, i % 2 == 0));
        p1.push_back(synthetic::random_tree(rng, 1, 3, LeafKind::Category, 3, false));
    }
    std::vector<std::vector<const InputTree*>> batch(2);
    for (const auto& t : p0) batch[0].push_back(&t);
    for (const auto& t : p1) batch[1].push_back(&t);
    std::vector<double> labels = {0, 1, 1, 0};

    GradResult analytic = grad(model, batch, labels);
    auto tensors = model.params.tensors();
    REQUIRE(analytic.grads.size() == tensors.size());

    double worst = 0;
    const double eps = 1e-4;
    for (size_t k = 0; k < tensors.size(); ++k) {
        Mat* tensor = tensors[k].second;
        for (size_t i = 0; i < tensor->a.size(); ++i) {
            double saved = tensor->a[i];
            tensor->a[i] = saved + eps;
            double up = grad(model, batch, labels).loss;
            tensor->a[i] = saved - eps;
            double down = grad(model, batch, labels).loss;
            tensor->a[i] = saved;
            double fd = (up - down) / (2 * eps);
            worst = std::max(worst, rel_err(analytic.grads[k].a[i], fd));
        }
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("squared-error loss with a zero head sends no gradient upstream") {
    R2NConfig config = tiny_config();
    config.task = Task::Regression;
    PathInputSpec spec;
    spec.name = "p";
    spec.depth = 1;
    spec.leaf = LeafKind::Number;
    R2NModel model = init_model(config, {spec});
    // zero the entire head: output is 0 for every input, targets are 0
    model.params.ff_w.back() = Mat(model.params.ff_w.back().rows, 1);
    model.params.ff_b.back() = Mat(1, 1);

    std::mt19937_64 rng(3);
    InputTree tree = synthetic::random_tree(rng, 1, 3, LeafKind::Number, 0, false);
    std::vector<std::vector<const InputTree*>> batch(1);
    batch[0].push_back(&tree);
    GradResult g = grad(model, batch, {0.0});
    CHECK(g.loss == 0.0);
    auto tensors = model.params.tensors();
    for (size_t k = 0; k < tensors.size(); ++k) {
        if (tensors[k].first.rfind("ff", 0) == 0) continue;  // the head itself
        for (double v : g.grads[k].a) CHECK(v == 0.0);
    }
}

TEST_CASE("duplicated examples leave the mean-loss gradient unchanged") {
    R2NConfig config = tiny_config();
    PathInputSpec spec;
    spec.name = "p";
    spec.depth = 1;
    spec.leaf = LeafKind::Number;
    R2NModel model = init_model(config, {spec});

    std::mt19937_64 rng(8);
    InputTree tree = synthetic::random_tree(rng, 1, 3, LeafKind::Number, 0, false);
    std::vector<std::vector<const InputTree*>> single(1), doubled(1);
    single[0] = {&tree};
    doubled[0] = {&tree, &tree};

    GradResult one = grad(model, single, {1.0});
    GradResult two = grad(model, doubled, {1.0, 1.0});
    CHECK(one.loss == doctest::Approx(two.loss).epsilon(1e-12));
    for (size_t k = 0; k < one.grads.size(); ++k)
        for (size_t i = 0; i < one.grads[k].a.size(); ++i)
            CHECK(one.grads[k].a[i] == doctest::Approx(two.grads[k].a[i]).epsilon(1e-9));
}

TEST_CASE("training runs deterministically and zero lr freezes parameters") {
    R2NDataset data = synthetic::sum_threshold_task(60, 31);
    R2NConfig config = tiny_config();
    config.cell_size = 4;
    config.max_epochs = 3;

    TrainReport a, b;
    R2NModel ma = train(data, config, &a);
    R2NModel mb = train(data, config, &b);
    REQUIRE(a.curve.size() == b.curve.size());
    for (size_t i = 0; i < a.curve.size(); ++i) {
        CHECK(a.curve[i].train_loss == b.curve[i].train_loss);
        bool both_nan = std::isnan(a.curve[i].val_loss) && std::isnan(b.curve[i].val_loss);
        CHECK((both_nan || a.curve[i].val_loss == b.curve[i].val_loss));
    }
    auto ta = ma.params.tensors();
    auto tb = mb.params.tensors();
    for (size_t k = 0; k < ta.size(); ++k) CHECK(ta[k].second->a == tb[k].second->a);

    config.learning_rate = 0.0;
    R2NModel frozen = train(data, config);
    R2NModel init = init_model(config, data.inputs);
    auto tf = frozen.params.tensors();
    auto ti = init.params.tensors();
    for (size_t k = 0; k < tf.size(); ++k) CHECK(tf[k].second->a == ti[k].second->a);
}

TEST_CASE("checkpoints round-trip bit for bit") {
    R2NConfig config = tiny_config();
    std::vector<PathInputSpec> inputs = two_path_inputs();
    inputs[1].vocab = {"with space", "comma,token", "line\nbreak"};
    R2NModel model = init_model(config, inputs);

    std::string bytes = save_model(model);
    CHECK(bytes.rfind("R2N1", 0) == 0);
    R2NModel back = load_model(bytes);
    CHECK(save_model(back) == bytes);
    CHECK(back.inputs[1].vocab == inputs[1].vocab);

    auto ta = model.params.tensors();
    auto tb = back.params.tensors();
    REQUIRE(ta.size() == tb.size());
    for (size_t k = 0; k < ta.size(); ++k) CHECK(ta[k].second->a == tb[k].second->a);
}

TEST_CASE("training rejects undersized datasets") {
    R2NDataset tiny = synthetic::sum_threshold_task(10, 1);
    CHECK_THROWS(train(tiny, tiny_config()));
}

TEST_CASE("regression training drives the squared error down") {
    // label = leaf sum itself, continuous
    R2NDataset data = synthetic::sum_threshold_task(120, 55);
    for (size_t e = 0; e < data.trees[0].size(); ++e) {
        double sum = 0;
        for (double v : data.trees[0][e].leaf_numbers) sum += v;
        data.labels[e] = sum;
    }
    R2NConfig config = tiny_config();
    config.cell_size = 6;
    config.task = Task::Regression;
    config.max_epochs = 40;
    config.patience_fraction = 3.0;  // squared error moves slowly at first

    TrainReport report;
    R2NModel model = train(data, config, &report);
    REQUIRE(!report.curve.empty());
    double first = report.curve.front().train_loss;
    CHECK(report.best_val_loss < first);

    std::vector<std::vector<const InputTree*>> ptrs(1);
    for (auto& t : data.trees[0]) ptrs[0].push_back(&t);
    Mat pred = predict(model, ptrs);
    REQUIRE(pred.cols == 1);
    double mse = 0;
    for (int i = 0; i < pred.rows; ++i) {
        double d = pred.at(i, 0) - data.labels[static_cast<size_t>(i)];
        mse += d * d;
    }
    mse /= pred.rows;
    CHECK(mse < 1.0);  // labels span roughly [0, 8]
}

// ---------------------------------------------------------------------------
// Expressiveness theorem machinery.

TEST_CASE("closed form reduces to the plain sum for the toy multiset") {
    LinearRnnSpec spec = LinearRnnSpec::scalar(1.0, 1.0, 1.0);
    std::vector<std::vector<double>> s = {{10}, {20}, {10}, {5}};
    CHECK(linear_rnn_closed_form(spec, s)[0] == doctest::Approx(45.0));
    CHECK(linear_rnn_unroll(spec, s)[0] == doctest::Approx(45.0));
}

TEST_CASE("closed form: empty set and singleton") {
    LinearRnnSpec spec = LinearRnnSpec::scalar(0.5, 1.0, 2.0, 0.25, -1.0, 3.0);
    CHECK(linear_rnn_closed_form(spec, {})[0] ==
          doctest::Approx(-1.0 + 2.0 * 3.0));  // c + U h0
    double x = 0.8;
    double expected = -1.0 + 2.0 * 3.0 + 2.0 * 0.25 + 2.0 * 0.5 * x;
    CHECK(linear_rnn_closed_form(spec, {{x}})[0] == doctest::Approx(expected));
    CHECK(linear_rnn_unroll(spec, {{x}})[0] == doctest::Approx(expected));
}

TEST_CASE("closed form demands H = identity") {
    LinearRnnSpec spec = LinearRnnSpec::scalar(1.0, 2.0, 1.0);
    CHECK_THROWS(linear_rnn_closed_form(spec, {{1.0}}));
}

TEST_CASE("the scalar counterexample violates invariance by the proof identity") {
    LinearRnnSpec spec = LinearRnnSpec::scalar(1.0, 2.0, 1.0);
    // hand-unrolled: s = (1, 0): h1 = 1, h2 = 2; reversed: h1 = 0, h2 = 1
    CHECK(linear_rnn_unroll(spec, {{1.0}, {0.0}})[0] == doctest::Approx(2.0));
    CHECK(linear_rnn_unroll(spec, {{0.0}, {1.0}})[0] == doctest::Approx(1.0));

    InvarianceReport report = check_set_invariance(spec, 1000, 17);
    REQUIRE_FALSE(report.certified_invariant);
    REQUIRE(report.counterexample.has_value());
    const auto& ce = *report.counterexample;
    CHECK(std::fabs(ce.delta - ce.identity_value) <= 1e-9);
}

TEST_CASE("H = 1 and constant specs certify invariance") {
    LinearRnnSpec sum_like = LinearRnnSpec::scalar(0.7, 1.0, 1.3, 0.2, -0.4, 0.9);
    CHECK(check_set_invariance(sum_like, 10000, 3).certified_invariant);

    LinearRnnSpec constant = LinearRnnSpec::scalar(0.7, 2.0, 0.0, 0.2, -0.4, 0.9);
    CHECK(check_set_invariance(constant, 10000, 4).certified_invariant);

    LinearRnnSpec w_zero = LinearRnnSpec::scalar(0.0, 2.0, 1.0, 0.2, -0.4, 0.9);
    CHECK(check_set_invariance(w_zero, 10000, 5).certified_invariant);
}
