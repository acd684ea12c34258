// Serial per-sample implementation. Slow and obvious on purpose: it is the
// oracle the batched kernels are tested against.
#include "emu/nn.hpp"

#include "emu/error.hpp"

namespace emu::nn {

namespace {

Vector<double> sigmoid(const Vector<double>& a) {
    return a.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

Vector<double> relu(const Vector<double>& a) { return a.cwiseMax(0.0); }

void check_dims(long got, long want, const char* what) {
    if (got != want)
        throw Error(ErrorKind::DimensionMismatch,
                    std::string(what) + ": got " + std::to_string(got) + ", expected " + std::to_string(want));
}

} // namespace

FfnnResult ffnn_forward(const Vector<double>& x, const std::vector<DenseLayer>& layers) {
    FfnnResult res;
    Vector<double> y = x;
    for (const auto& layer : layers) {
        check_dims(y.size(), layer.W.cols(), "dense input");
        check_dims(layer.b.size(), layer.W.rows(), "dense bias");
        res.cache.inputs.push_back(y);
        Vector<double> pre = layer.W * y + layer.b;
        res.cache.pre.push_back(pre);
        y = layer.activation == Activation::relu ? relu(pre) : pre;
    }
    res.y = std::move(y);
    return res;
}

GruStep gru_step(const Vector<double>& x, const Vector<double>& h_prev, const GruLayer& layer,
                 CandidateResetMode mode) {
    check_dims(x.size(), layer.input_dim(), "gru input");
    check_dims(h_prev.size(), layer.width(), "gru state");
    GruStep s;
    s.z = sigmoid(layer.Wz * x + layer.Uz * h_prev + layer.bz);
    s.r = sigmoid(layer.Wr * x + layer.Ur * h_prev + layer.br);
    if (mode == CandidateResetMode::standard)
        s.candidate = (layer.Wh * x + layer.Uh * s.r.cwiseProduct(h_prev) + layer.bh).array().tanh();
    else
        s.candidate = (layer.Wh * x + layer.Uh * h_prev + layer.bh).array().tanh();
    s.h = (Vector<double>::Ones(h_prev.size()) - s.z).cwiseProduct(h_prev) + s.z.cwiseProduct(s.candidate);
    return s;
}

namespace reference {

Vector<double> forward(const Network<double>& net, const Sequence& x, Tape* tape) {
    const auto& spec = net.spec();
    if (x.empty())
        throw Error(ErrorKind::DimensionMismatch, "empty input sequence");
    for (const auto& v : x)
        check_dims(v.size(), spec.input_dim, "input");

    const int J = spec.gru_layers();
    std::vector<std::vector<GruStep>> steps(static_cast<std::size_t>(J));
    Sequence current = x;
    for (int j = 0; j < J; ++j) {
        const GruLayer layer = gru_layer(net, j);
        Vector<double> h = Vector<double>::Zero(layer.width());
        Sequence next;
        for (const auto& xt : current) {
            GruStep s = gru_step(xt, h, layer, spec.reset_mode);
            h = s.h;
            next.push_back(s.h);
            steps[static_cast<std::size_t>(j)].push_back(std::move(s));
        }
        current = std::move(next);
    }

    std::vector<DenseLayer> dense;
    for (int k = 0; k < net.num_dense(); ++k)
        dense.push_back(dense_layer(net, k));
    FfnnResult head = ffnn_forward(current.back(), dense);
    if (tape) {
        tape->inputs = x;
        tape->steps = std::move(steps);
        tape->head = std::move(head.cache);
        tape->output = head.y;
    }
    return head.y;
}

std::vector<double> backward(const Network<double>& net, const Tape& tape, const Vector<double>& loss_grad) {
    if (tape.empty() || tape.head.pre.empty())
        throw Error(ErrorKind::MissingCache, "forward tape is empty");
    const auto& spec = net.spec();
    check_dims(loss_grad.size(), spec.output_dim, "loss gradient");
    Network<double> g(spec);

    Vector<double> dy = loss_grad;
    for (int k = net.num_dense() - 1; k >= 0; --k) {
        const auto& pre = tape.head.pre[static_cast<std::size_t>(k)];
        const auto& in = tape.head.inputs[static_cast<std::size_t>(k)];
        Vector<double> dpre = dy;
        if (net.dense_activation(k) == Activation::relu)
            for (Eigen::Index i = 0; i < dpre.size(); ++i)
                dpre[i] = pre[i] > 0.0 ? dpre[i] : 0.0;
        g.dense_W(k) += dpre * in.transpose();
        g.dense_b(k) += dpre;
        dy = net.dense_W(k).transpose() * dpre;
    }

    const int J = spec.gru_layers();
    if (J == 0)
        return {g.params().begin(), g.params().end()};

    const std::size_t T = tape.inputs.size();
    const int h = spec.recurrent_width;
    // gradient arriving at each step's hidden state from the layer above
    std::vector<Vector<double>> from_above(T, Vector<double>::Zero(h));
    from_above[T - 1] = dy;

    for (int j = J - 1; j >= 0; --j) {
        const GruLayer L = gru_layer(net, j);
        const auto& steps = tape.steps[static_cast<std::size_t>(j)];
        auto gW = g.gru_W(j);
        auto gU = g.gru_U(j);
        auto gb = g.gru_b(j);
        std::vector<Vector<double>> to_below(T, Vector<double>::Zero(L.input_dim()));
        Vector<double> dh_next = Vector<double>::Zero(h);

        for (std::size_t t = T; t-- > 0;) {
            const GruStep& s = steps[t];
            const Vector<double> hp = t == 0 ? Vector<double>::Zero(h) : steps[t - 1].h;
            const Vector<double>& in = j == 0 ? tape.inputs[t] : tape.steps[static_cast<std::size_t>(j - 1)][t].h;
            const Vector<double> dh = from_above[t] + dh_next;

            const Vector<double> dz = dh.cwiseProduct(s.candidate - hp);
            const Vector<double> dcand = dh.cwiseProduct(s.z);
            Vector<double> dhp = dh.cwiseProduct(Vector<double>::Ones(h) - s.z);

            const Vector<double> dah =
                dcand.cwiseProduct(Vector<double>::Ones(h) - s.candidate.cwiseProduct(s.candidate));
            const Vector<double> daz = dz.cwiseProduct(s.z).cwiseProduct(Vector<double>::Ones(h) - s.z);
            Vector<double> dr = Vector<double>::Zero(h);
            if (spec.reset_mode == CandidateResetMode::standard) {
                const Vector<double> rh = s.r.cwiseProduct(hp);
                gU.bottomRows(h) += dah * rh.transpose();
                const Vector<double> drh = L.Uh.transpose() * dah;
                dr = drh.cwiseProduct(hp);
                dhp += drh.cwiseProduct(s.r);
            } else {
                gU.bottomRows(h) += dah * hp.transpose();
                dhp += L.Uh.transpose() * dah;
            }
            const Vector<double> dar = dr.cwiseProduct(s.r).cwiseProduct(Vector<double>::Ones(h) - s.r);

            gW.topRows(h) += daz * in.transpose();
            gW.middleRows(h, h) += dar * in.transpose();
            gW.bottomRows(h) += dah * in.transpose();
            gU.topRows(h) += daz * hp.transpose();
            gU.middleRows(h, h) += dar * hp.transpose();
            gb.head(h) += daz;
            gb.segment(h, h) += dar;
            gb.tail(h) += dah;

            dhp += L.Uz.transpose() * daz + L.Ur.transpose() * dar;
            to_below[t] = L.Wz.transpose() * daz + L.Wr.transpose() * dar + L.Wh.transpose() * dah;
            dh_next = dhp;
        }
        from_above = std::move(to_below);
    }
    return {g.params().begin(), g.params().end()};
}

double loss_and_gradient(const Network<double>& net, const Sequence& x, const Vector<double>& target,
                         std::vector<double>& grad) {
    Tape tape;
    const Vector<double> y = forward(net, x, &tape);
    check_dims(target.size(), y.size(), "target");
    const Vector<double> err = y - target;
    const double n = static_cast<double>(y.size());
    grad = backward(net, tape, (2.0 / n) * err);
    return err.squaredNorm() / n;
}

} // namespace reference

} // namespace emu::nn
