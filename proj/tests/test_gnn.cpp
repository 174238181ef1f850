#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "klever/gnn.hpp"
#include "klever/optim.hpp"
#include "support.hpp"

using namespace klever;

namespace {

using Dense = std::vector<std::vector<double>>;

Dense dense(const Tensor& t) {
    Dense out(t.rows(), std::vector<double>(t.cols()));
    for (std::size_t i = 0; i < t.rows(); ++i) {
        for (std::size_t j = 0; j < t.cols(); ++j) {
            out[i][j] = t.at(i, j);
        }
    }
    return out;
}

Dense matmul(const Dense& a, const Dense& b) {
    Dense out(a.size(), std::vector<double>(b.empty() ? 0 : b[0].size(), 0.0));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t k = 0; k < b.size(); ++k)
            for (std::size_t j = 0; j < b[0].size(); ++j) out[i][j] += a[i][k] * b[k][j];
    return out;
}

Dense transpose(const Dense& a) {
    Dense out(a[0].size(), std::vector<double>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[0].size(); ++j) out[j][i] = a[i][j];
    return out;
}

void add_into(Dense& acc, const Dense& x) {
    for (std::size_t i = 0; i < acc.size(); ++i)
        for (std::size_t j = 0; j < acc[i].size(); ++j) acc[i][j] += x[i][j];
}

void expect_close(const Tensor& got, const Dense& want, double tol = 1e-12) {
    ASSERT_EQ(got.rows(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i)
        for (std::size_t j = 0; j < want[i].size(); ++j) EXPECT_NEAR(got.at(i, j), want[i][j], tol);
}

Tensor random_tensor(std::vector<std::size_t> dims, std::mt19937_64& rng) {
    Tensor t(std::move(dims));
    std::normal_distribution<double> d(0.0, 1.0);
    for (auto& v : t.data()) v = d(rng);
    return t;
}

Tensor identity(std::size_t n) {
    auto t = Tensor::matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

}  // namespace

TEST(IdgGcn, ZeroEmbeddingsGiveZeroOutput) {
    DescriptiveGraph g({"a", "b"}, {"x", "y", "z"});
    g.add_edge(0, 0);
    g.add_edge(1, 2);
    std::mt19937_64 rng(1);
    auto w = random_tensor({4, 4}, rng);
    auto w0 = random_tensor({4, 4}, rng);
    std::vector<ConvLayer> layers{{{&w}, &w0}};
    auto enc = idg_gcn_forward(g, Tensor::matrix(2, 4), Tensor::matrix(3, 4), layers);
    for (double v : enc.items.data()) EXPECT_EQ(v, 0.0);
    for (double v : enc.words.data()) EXPECT_EQ(v, 0.0);
}

TEST(IdgGcn, SingleNeighborSubstitution) {
    DescriptiveGraph g({"u"}, {"w"});
    g.add_edge(0, 0);
    auto w = identity(2);
    auto w0 = identity(2);
    std::vector<ConvLayer> layers{{{&w}, &w0}};
    auto enc = idg_gcn_forward(g, Tensor({1, 2}, {0.0, 0.0}), Tensor({1, 2}, {1.0, -1.0}), layers);
    EXPECT_DOUBLE_EQ(enc.items.at(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(enc.items.at(0, 1), -0.01);
}

TEST(IdgGcn, NeighborOrderDoesNotMatter) {
    std::mt19937_64 rng(2);
    auto items = random_tensor({1, 3}, rng);
    auto words = random_tensor({4, 3}, rng);
    auto w = random_tensor({3, 3}, rng);
    auto w0 = random_tensor({3, 3}, rng);
    std::vector<ConvLayer> layers{{{&w}, &w0}};
    DescriptiveGraph a({"u"}, {"p", "q", "r", "s"});
    for (std::size_t i : {0, 1, 2, 3}) a.add_edge(0, i);
    // same neighbor set with storage order permuted
    DescriptiveGraph b({"u"}, {"s", "r", "q", "p"});
    for (std::size_t i : {3, 1, 0, 2}) b.add_edge(0, i);
    Tensor words_b = Tensor::matrix(4, 3);
    for (std::size_t i = 0; i < 4; ++i) std::copy(words.row(3 - i).begin(), words.row(3 - i).end(), words_b.row(i).begin());
    auto ea = idg_gcn_forward(a, items, words, layers);
    auto eb = idg_gcn_forward(b, items, words_b, layers);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(ea.items.at(0, j), eb.items.at(0, j), 1e-12);
}

TEST(IdgGcn, MatchesDenseReference) {
    std::mt19937_64 rng(3);
    DescriptiveGraph g({"a", "b", "c"}, {"x", "y", "z", "t"});
    for (auto [u, w] : std::vector<std::pair<int, int>>{{0, 0}, {0, 1}, {1, 1}, {1, 3}, {2, 2}}) g.add_edge(u, w);
    auto xi = random_tensor({4, 3}, rng);  // one extra isolated entity row
    auto xw = random_tensor({4, 3}, rng);
    auto w = random_tensor({3, 3}, rng);
    auto w0 = random_tensor({3, 3}, rng);
    std::vector<ConvLayer> layers{{{&w}, &w0}};
    auto enc = idg_gcn_forward(g, xi, xw, layers);

    Dense x = dense(xi);
    for (auto& r : dense(xw)) x.push_back(r);
    Dense adj(8, std::vector<double>(8, 0.0));
    for (const auto& [u, wd] : g.edges()) {
        adj[u][4 + wd] = 1.0;
        adj[4 + wd][u] = 1.0;
    }
    Dense pre = matmul(matmul(adj, x), transpose(dense(w)));
    add_into(pre, matmul(x, transpose(dense(w0))));
    for (auto& r : pre)
        for (auto& v : r) v = v > 0 ? v : 0.01 * v;
    Dense want_items(pre.begin(), pre.begin() + 4);
    Dense want_words(pre.begin() + 4, pre.end());
    expect_close(enc.items, want_items);
    expect_close(enc.words, want_words);
}

TEST(Rgcn, NoEdgesIsSelfTransformOnly) {
    std::mt19937_64 rng(4);
    RelationalGraph g(3, 2);
    auto x = random_tensor({3, 2}, rng);
    auto w0 = random_tensor({2, 2}, rng);
    auto wa = random_tensor({2, 2}, rng);
    auto wb = random_tensor({2, 2}, rng);
    std::vector<ConvLayer> layers{{{&wa, &wb}, &w0}};
    auto out = rgcn_forward(g, x, layers);
    auto expect = leaky_relu(linear(x, w0));
    EXPECT_EQ(out.output, expect);
}

TEST(Rgcn, OneNeighborIdentityWeights) {
    RelationalGraph g(2, 1);
    g.add_edge(1, 0, 0);
    auto w = identity(2);
    auto w0 = Tensor::matrix(2, 2);
    std::vector<ConvLayer> layers{{{&w}, &w0}};
    auto out = rgcn_forward(g, Tensor({2, 2}, {0.0, 0.0, 3.0, -2.0}), layers);
    EXPECT_DOUBLE_EQ(out.output.at(0, 0), 3.0);
    EXPECT_DOUBLE_EQ(out.output.at(0, 1), -0.02);
}

TEST(Rgcn, MatchesDenseReferenceOnRandomGraph) {
    std::mt19937_64 rng(5);
    const std::size_t n = 6;
    const std::size_t rels = 3;
    RelationalGraph g(n, rels);
    std::uniform_int_distribution<std::size_t> node(0, n - 1);
    std::uniform_int_distribution<std::size_t> rel(0, rels - 1);
    std::vector<RelationalEdge> edges;
    for (int e = 0; e < 12; ++e) {
        RelationalEdge edge{node(rng), rel(rng), node(rng)};
        g.add_edge(edge.head, edge.relation, edge.tail);
        edges.push_back(edge);
    }
    auto x = random_tensor({n, 4}, rng);
    auto w0 = random_tensor({4, 4}, rng);
    std::vector<Tensor> wr;
    for (std::size_t r = 0; r < rels; ++r) wr.push_back(random_tensor({4, 4}, rng));
    std::vector<ConvLayer> layers{{{&wr[0], &wr[1], &wr[2]}, &w0}};
    auto out = rgcn_forward(g, x, layers);

    Dense pre = matmul(dense(x), transpose(dense(w0)));
    for (std::size_t r = 0; r < rels; ++r) {
        Dense a(n, std::vector<double>(n, 0.0));
        std::vector<double> indeg(n, 0.0);
        for (const auto& e : edges)
            if (e.relation == r) indeg[e.tail] += 1.0;
        for (const auto& e : edges)
            if (e.relation == r) a[e.tail][e.head] += 1.0 / indeg[e.tail];
        add_into(pre, matmul(matmul(a, dense(x)), transpose(dense(wr[r]))));
    }
    for (auto& row : pre)
        for (auto& v : row) v = v > 0 ? v : 0.01 * v;
    expect_close(out.output, pre);
}

TEST(WordGcn, IsolatedNodeUsesSelfOnly) {
    std::mt19937_64 rng(6);
    WordGraph g(2);
    auto x = random_tensor({2, 3}, rng);
    auto w = random_tensor({3, 3}, rng);
    auto w0 = random_tensor({3, 3}, rng);
    std::vector<ConvLayer> layers{{{&w}, &w0}};
    EXPECT_EQ(word_gcn_forward(g, x, layers).output, leaky_relu(linear(x, w0)));
}

TEST(WordGcn, SymmetricPairGivesEqualOutputs) {
    std::mt19937_64 rng(7);
    WordGraph g(2);
    g.add_edge(0, 1);
    Tensor x({2, 3}, {0.5, -1.0, 2.0, 0.5, -1.0, 2.0});
    auto w = random_tensor({3, 3}, rng);
    auto w0 = random_tensor({3, 3}, rng);
    std::vector<ConvLayer> layers{{{&w}, &w0}};
    auto out = word_gcn_forward(g, x, layers).output;
    for (std::size_t j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(out.at(0, j), out.at(1, j));
}

TEST(WordGcn, MatchesDenseReference) {
    std::mt19937_64 rng(8);
    const std::size_t n = 8;
    WordGraph g(n);
    Dense a(n, std::vector<double>(n, 0.0));
    std::uniform_int_distribution<std::size_t> node(0, n - 1);
    for (int e = 0; e < 14; ++e) {
        auto i = node(rng);
        auto j = node(rng);
        g.add_edge(i, j);
        if (i != j) a[i][j] = a[j][i] = 1.0;
    }
    std::vector<double> deg(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) deg[i] += a[i][j];
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (a[i][j] != 0.0) a[i][j] = 1.0 / std::sqrt(deg[i] * deg[j]);
    auto x = random_tensor({n, 3}, rng);
    auto w = random_tensor({3, 3}, rng);
    auto w0 = random_tensor({3, 3}, rng);
    std::vector<ConvLayer> layers{{{&w}, &w0}};
    Dense pre = matmul(matmul(a, dense(x)), transpose(dense(w)));
    add_into(pre, matmul(dense(x), transpose(dense(w0))));
    for (auto& row : pre)
        for (auto& v : row) v = v > 0 ? v : 0.01 * v;
    expect_close(word_gcn_forward(g, x, layers).output, pre);
}

TEST(GraphConv, TwoLayerGradientsMatchFiniteDifferences) {
    std::mt19937_64 rng(9);
    RelationalGraph g(5, 2);
    for (auto [h, r, t] : std::vector<std::tuple<int, int, int>>{{0, 0, 1}, {1, 0, 2}, {3, 1, 2}, {4, 1, 0}, {2, 0, 0}})
        g.add_edge(h, r, t);
    ParamRegistry reg;
    reg.add("x", random_tensor({5, 3}, rng));
    for (int l = 0; l < 2; ++l) {
        reg.add("w0." + std::to_string(l), random_tensor({3, 3}, rng));
        reg.add("wa." + std::to_string(l), random_tensor({3, 3}, rng));
        reg.add("wb." + std::to_string(l), random_tensor({3, 3}, rng));
    }
    const auto probe = random_tensor({5, 3}, rng);
    auto loss_fn = [&](ParamRegistry& r) {
        std::vector<ConvLayer> layers;
        for (int l = 0; l < 2; ++l) {
            const auto s = std::to_string(l);
            layers.push_back({{&r.value("wa." + s), &r.value("wb." + s)}, &r.value("w0." + s)});
        }
        auto fwd = rgcn_forward(g, r.value("x"), layers);
        double loss = 0.0;
        for (std::size_t i = 0; i < probe.size(); ++i) loss += probe[i] * fwd.output[i];
        auto grads = rgcn_backward(g, fwd, layers, probe);
        r.grad("x") += grads.d_input;
        for (int l = 0; l < 2; ++l) {
            const auto s = std::to_string(l);
            r.grad("w0." + s) += grads.d_self[l];
            r.grad("wa." + s) += grads.d_neighbor[l][0];
            r.grad("wb." + s) += grads.d_neighbor[l][1];
        }
        return loss;
    };
    auto report = finite_diff_check(loss_fn, reg);
    EXPECT_TRUE(report.passed) << report.worst_parameter << " " << report.max_relative_error;
}

TEST(IdgGcn, NormalizedGradientsMatchFiniteDifferences) {
    std::mt19937_64 rng(10);
    DescriptiveGraph g({"a", "b", "c"}, {"x", "y", "z"});
    for (auto [u, w] : std::vector<std::pair<int, int>>{{0, 0}, {0, 1}, {1, 1}, {2, 2}, {2, 0}}) g.add_edge(u, w);
    ParamRegistry reg;
    reg.add("items", random_tensor({3, 4}, rng));
    reg.add("words", random_tensor({3, 4}, rng));
    reg.add("w", random_tensor({4, 4}, rng));
    reg.add("w0", random_tensor({4, 4}, rng));
    const auto pi = random_tensor({3, 4}, rng);
    const auto pw = random_tensor({3, 4}, rng);
    auto loss_fn = [&](ParamRegistry& r) {
        std::vector<ConvLayer> layers{{{&r.value("w")}, &r.value("w0")}};
        auto enc = idg_gcn_forward(g, r.value("items"), r.value("words"), layers, true);
        double loss = 0.0;
        for (std::size_t i = 0; i < pi.size(); ++i) loss += pi[i] * enc.items[i] + pw[i] * enc.words[i];
        auto grads = idg_gcn_backward(g, enc, layers, pi, pw, true);
        r.grad("items") += grads.d_item_x;
        r.grad("words") += grads.d_word_x;
        r.grad("w") += grads.d_neighbor[0];
        r.grad("w0") += grads.d_self[0];
        return loss;
    };
    auto report = finite_diff_check(loss_fn, reg);
    EXPECT_TRUE(report.passed) << report.worst_parameter << " " << report.max_relative_error;
}
