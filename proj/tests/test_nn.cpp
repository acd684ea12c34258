#include "emu/nn.hpp"

#include "helpers.hpp"
#include "oracles.hpp"

using namespace emu;
using namespace emu::nn;

namespace {

NetworkSpec gru_spec(int d, int h, int J, int K, int width, CandidateResetMode mode = CandidateResetMode::standard) {
    NetworkSpec s;
    s.architecture = Architecture::gru_ffnn;
    s.recurrent_layers = J;
    s.recurrent_width = h;
    s.ff_layers = K;
    s.ff_start_width = width;
    s.input_dim = d;
    s.output_dim = 4;
    s.reset_mode = mode;
    return s;
}

NetworkSpec ffnn_spec(int d, int K, int width) {
    NetworkSpec s;
    s.architecture = Architecture::ffnn;
    s.recurrent_layers = 0;
    s.ff_layers = K;
    s.ff_start_width = width;
    s.input_dim = d;
    return s;
}

Network<double> random_network(const NetworkSpec& spec, std::uint64_t seed, double scale = 0.5) {
    Network<double> net(spec);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (double& p : net.params())
        p = u(rng);
    return net;
}

reference::Sequence random_sequence(int d, int steps, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    reference::Sequence xs(steps, Vector<double>(d));
    for (auto& x : xs)
        for (int i = 0; i < d; ++i)
            x[i] = u(rng);
    return xs;
}

std::vector<oracle::Vec> to_oracle(const reference::Sequence& xs) {
    std::vector<oracle::Vec> out;
    for (const auto& x : xs)
        out.emplace_back(x.data(), x.data() + x.size());
    return out;
}

oracle::NetDims dims_of(const NetworkSpec& spec) {
    oracle::NetDims d;
    d.input = spec.input_dim;
    for (int j = 0; j < spec.gru_layers(); ++j)
        d.gru_widths.push_back(spec.recurrent_width);
    for (int w : spec.ff_widths())
        d.dense_widths.push_back(w);
    d.output = spec.output_dim;
    d.standard = spec.reset_mode == CandidateResetMode::standard;
    return d;
}

std::vector<double> flat(const Network<double>& net) { return {net.params().begin(), net.params().end()}; }

double sample_loss(const Network<double>& net, const reference::Sequence& xs, const Vector<double>& target) {
    const Vector<double> y = reference::forward(net, xs);
    return (y - target).squaredNorm() / static_cast<double>(y.size());
}

} // namespace

TEST_CASE("dense layer examples") {
    DenseLayer zero{Matrix<double>::Zero(3, 2), Vector<double>::Zero(3), Activation::relu};
    Vector<double> x(2);
    x << 7.0, -3.0;
    CHECK(ffnn_forward(x, {zero}).y == Vector<double>::Zero(3));

    DenseLayer ident{Matrix<double>::Identity(2, 2), Vector<double>::Zero(2), Activation::relu};
    Vector<double> v(2);
    v << -1.0, 2.0;
    const auto y = ffnn_forward(v, {ident}).y;
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 2.0);

    // Two layers with fixed weights against hand arithmetic:
    // h = relu([1 -1; 2 0.5] (1, 2) + (0.5, -1)) = relu(-0.5, 2) = (0, 2)
    // out = [3 -2] (0, 2) + 0.25 = -3.75
    DenseLayer l1{Matrix<double>(2, 2), Vector<double>(2), Activation::relu};
    l1.W << 1, -1, 2, 0.5;
    l1.b << 0.5, -1;
    DenseLayer l2{Matrix<double>(1, 2), Vector<double>(1), Activation::identity};
    l2.W << 3, -2;
    l2.b << 0.25;
    Vector<double> in(2);
    in << 1, 2;
    CHECK(ffnn_forward(in, {l1, l2}).y[0] == -3.75);
}

TEST_CASE("feed-forward network matches the loop oracle") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto spec = ffnn_spec(6, 3, 8);
        const auto net = random_network(spec, seed);
        const auto xs = random_sequence(6, 1, seed + 100);
        const auto got = reference::forward(net, xs);
        const auto want = oracle::network(flat(net), dims_of(spec), to_oracle(xs));
        for (int i = 0; i < got.size(); ++i)
            CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-13));
    }
}

TEST_CASE("GRU step with zero parameters") {
    GruLayer layer;
    layer.Wz = layer.Wr = layer.Wh = Matrix<double>::Zero(3, 2);
    layer.Uz = layer.Ur = layer.Uh = Matrix<double>::Zero(3, 3);
    layer.bz = layer.br = layer.bh = Vector<double>::Zero(3);
    Vector<double> x(2);
    x << 0.3, -4.0;
    for (auto mode : {CandidateResetMode::standard, CandidateResetMode::as_written}) {
        const auto s = gru_step(x, Vector<double>::Zero(3), layer, mode);
        CHECK(s.z == Vector<double>::Constant(3, 0.5));
        CHECK(s.r == Vector<double>::Constant(3, 0.5));
        CHECK(s.candidate == Vector<double>::Zero(3));
        CHECK(s.h == Vector<double>::Zero(3));
    }
}

TEST_CASE("saturated update gate copies the candidate") {
    auto net = random_network(gru_spec(3, 4, 1, 1, 4), 9);
    GruLayer layer = gru_layer(net, 0);
    layer.bz = Vector<double>::Constant(4, 50.0);
    Vector<double> x(3);
    x << 0.2, -0.7, 0.9;
    Vector<double> h0(4);
    h0 << 0.5, -0.5, 0.25, 0.9;
    const auto s = gru_step(x, h0, layer, CandidateResetMode::standard);
    for (int i = 0; i < 4; ++i)
        CHECK(std::abs(s.h[i] - s.candidate[i]) < 1e-15 * 1e6);
}

TEST_CASE("GRU network over three steps matches the recurrence oracle") {
    for (auto mode : {CandidateResetMode::standard, CandidateResetMode::as_written}) {
        for (int J : {1, 2}) {
            const auto spec = gru_spec(4, 5, J, 2, 6, mode);
            const auto net = random_network(spec, 40 + J);
            const auto xs = random_sequence(4, 3, 7);
            const auto got = reference::forward(net, xs);
            const auto want = oracle::network(flat(net), dims_of(spec), to_oracle(xs));
            for (int i = 0; i < got.size(); ++i)
                CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-13));
        }
    }
}

TEST_CASE("candidate modes differ only through the reset gate") {
    auto spec = gru_spec(3, 4, 1, 1, 4, CandidateResetMode::standard);
    auto net = random_network(spec, 3);
    const auto xs = random_sequence(3, 4, 4);
    const auto standard = reference::forward(net, xs);
    spec.reset_mode = CandidateResetMode::as_written;
    Network<double> written(spec);
    std::copy(net.params().begin(), net.params().end(), written.params().begin());
    CHECK((reference::forward(written, xs) - standard).norm() > 1e-6);

    // Reset gate pinned at 1 makes the two modes coincide.
    net.gru_b(0).segment(4, 4).setConstant(60.0);
    written.gru_b(0).segment(4, 4).setConstant(60.0);
    CHECK((reference::forward(written, xs) - reference::forward(net, xs)).norm() < 1e-12);
}

TEST_CASE("composition identities") {
    // J = 0: an FFNN applied to the last input.
    const auto fspec = ffnn_spec(3, 2, 4);
    const auto fnet = random_network(fspec, 5);
    const auto xs = random_sequence(3, 5, 6);
    const auto last = reference::forward(fnet, reference::Sequence{xs.back()});
    CHECK(reference::forward(fnet, xs) == last);

    // T = 1: one gru_step then the feed-forward head.
    const auto spec = gru_spec(3, 4, 1, 2, 4);
    const auto net = random_network(spec, 7);
    const auto one = random_sequence(3, 1, 8);
    const auto step = gru_step(one[0], Vector<double>::Zero(4), gru_layer(net, 0), spec.reset_mode);
    std::vector<DenseLayer> head;
    for (int k = 0; k < net.num_dense(); ++k)
        head.push_back(dense_layer(net, k));
    CHECK((reference::forward(net, one) - ffnn_forward(step.h, head).y).norm() < 1e-15);

    // J = 1, K = 1, T = 2 against the oracle.
    const auto small = gru_spec(2, 3, 1, 1, 3);
    const auto snet = random_network(small, 11);
    const auto two = random_sequence(2, 2, 12);
    const auto got = reference::forward(snet, two);
    const auto want = oracle::network(flat(snet), dims_of(small), to_oracle(two));
    for (int i = 0; i < got.size(); ++i)
        CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-13));
}

TEST_CASE("backward matches finite differences") {
    struct Case {
        NetworkSpec spec;
        int steps;
    };
    std::vector<Case> cases{{ffnn_spec(5, 2, 6), 1},
                            {gru_spec(5, 4, 2, 2, 6), 7},
                            {gru_spec(5, 4, 2, 2, 6, CandidateResetMode::as_written), 7},
                            {gru_spec(5, 4, 1, 1, 4), 7}};
    std::uint64_t seed = 100;
    for (const auto& c : cases) {
        const auto net = random_network(c.spec, ++seed);
        const auto xs = random_sequence(c.spec.input_dim, c.steps, ++seed);
        Vector<double> target = Vector<double>::Constant(4, 0.7);
        std::vector<double> grad(net.num_params());
        reference::loss_and_gradient(net, xs, target, grad);
        const auto fd = oracle::finite_difference(flat(net), [&](const std::vector<double>& p) {
            Network<double> probe(c.spec);
            std::copy(p.begin(), p.end(), probe.params().begin());
            return sample_loss(probe, xs, target);
        }, 1e-5);
        CHECK(oracle::max_relative_error(grad, fd) < 1e-4);
    }
}

TEST_CASE("backward of a single linear layer is the least-squares gradient") {
    const auto spec = ffnn_spec(3, 1, 2);
    auto net = random_network(spec, 8);
    // Silence the hidden layer so the output is the head bias alone, then
    // check head gradients: dL/db = 2 (y - t) / n.
    net.dense_W(0).setZero();
    net.dense_b(0).setZero();
    const auto xs = random_sequence(3, 1, 9);
    Vector<double> target(4);
    target << 1, 2, 3, 4;
    std::vector<double> grad(net.num_params());
    reference::loss_and_gradient(net, xs, target, grad);
    const auto y = reference::forward(net, xs);
    const auto& head_b = net.blocks().back();
    for (int i = 0; i < 4; ++i)
        CHECK(grad[head_b.offset + i] == doctest::Approx(2.0 * (y[i] - target[i]) / 4.0).epsilon(1e-14));
}

TEST_CASE("zero loss gradient and missing tape") {
    const auto net = random_network(gru_spec(3, 4, 2, 2, 4), 12);
    reference::Tape tape;
    reference::forward(net, random_sequence(3, 5, 13), &tape);
    const auto g = reference::backward(net, tape, Vector<double>::Zero(4));
    CHECK(std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; }));
    CHECK_ERROR_KIND(reference::backward(net, reference::Tape{}, Vector<double>::Zero(4)), ErrorKind::MissingCache);
    CHECK_ERROR_KIND(reference::forward(net, random_sequence(2, 5, 13)), ErrorKind::DimensionMismatch);
}

TEST_CASE("funnel widths and layout") {
    CHECK(ffnn_spec(4, 3, 128).ff_widths() == std::vector<int>{128, 64, 32});
    CHECK(ffnn_spec(4, 5, 4).ff_widths() == std::vector<int>{4, 2, 1, 1, 1});
    auto flat_spec = ffnn_spec(4, 3, 16);
    flat_spec.funnel = false;
    CHECK(flat_spec.ff_widths() == std::vector<int>{16, 16, 16});

    const auto layout = param_layout(gru_spec(5, 4, 2, 2, 8));
    std::vector<std::string> names;
    for (const auto& b : layout)
        names.push_back(b.name);
    CHECK(names == std::vector<std::string>{"gru1.W", "gru1.U", "gru1.b", "gru2.W", "gru2.U", "gru2.b", "dense1.W",
                                            "dense1.b", "dense2.W", "dense2.b", "head.W", "head.b"});
    CHECK(layout[0].rows == 12);
    CHECK(layout[0].cols == 5);
    CHECK(layout[3].cols == 4);
    CHECK(layout[6].cols == 4);
    CHECK(layout[8].rows == 4);
    CHECK(layout[10].rows == 4);
    std::size_t offset = 0;
    for (const auto& b : layout) {
        CHECK(b.offset == offset);
        offset += b.size();
    }
    CHECK(Network<double>(gru_spec(5, 4, 2, 2, 8)).num_params() == offset);
}

TEST_CASE("Glorot initialisation is seeded and bounded") {
    const auto spec = gru_spec(5, 8, 2, 2, 8);
    Network<double> a(spec), b(spec), c(spec);
    a.init_glorot(1);
    b.init_glorot(1);
    c.init_glorot(2);
    CHECK(a == b);
    CHECK(!(a == c));
    CHECK(a.gru_b(0).isZero());
    CHECK(a.dense_b(0).isZero());
    const double limit = std::sqrt(6.0 / (5 + 8));
    CHECK(a.gru_W(0).cwiseAbs().maxCoeff() <= limit);
    CHECK(a.gru_W(0).cwiseAbs().maxCoeff() > 0.5 * limit);
}

TEST_CASE("hidden state stays within max(|h0|, 1)") {
    std::mt19937_64 rng(14);
    std::uniform_real_distribution<double> big(-5.0, 5.0);
    auto net = random_network(gru_spec(3, 6, 1, 1, 2), 15, 3.0);
    const GruLayer layer = gru_layer(net, 0);
    Vector<double> h(6);
    for (int i = 0; i < 6; ++i)
        h[i] = big(rng);
    const double bound = std::max(h.cwiseAbs().maxCoeff(), 1.0);
    Vector<double> x(3);
    for (int t = 0; t < 10000; ++t) {
        for (int i = 0; i < 3; ++i)
            x[i] = big(rng);
        h = gru_step(x, h, layer, t % 2 ? CandidateResetMode::standard : CandidateResetMode::as_written).h;
        REQUIRE(h.cwiseAbs().maxCoeff() <= bound);
    }
}

TEST_CASE("NetworkSpec JSON and validation") {
    const auto spec = gru_spec(34, 128, 3, 3, 128, CandidateResetMode::as_written);
    CHECK(nlohmann::json(spec).get<NetworkSpec>() == spec);
    auto bad = spec;
    bad.ff_layers = 0;
    CHECK_ERROR_KIND(bad.validate(), ErrorKind::InvalidConfig);
    CHECK(parse_architecture("gru_ffnn") == Architecture::gru_ffnn);
}
