#pragma once

#include <cmath>
#include <vector>

#include "seqcl/tape.hpp"

namespace seqcl::train {

// Adam with bias correction and optional global-norm gradient clipping.
// State is indexed by position in the parameter list, which must stay
// stable across steps.
template <class T>
class Adam {
public:
    Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(const std::vector<nn::Mat<T>*>& params, std::vector<nn::Mat<T>>& grads,
              double clip_norm) {
        require(params.size() == grads.size(), "adam: params/grads size mismatch");
        if (m_.empty()) {
            m_.reserve(params.size());
            v_.reserve(params.size());
            for (auto* p : params) {
                m_.push_back(nn::Mat<T>::Zero(p->rows(), p->cols()));
                v_.push_back(nn::Mat<T>::Zero(p->rows(), p->cols()));
            }
        }
        require(m_.size() == params.size(), "adam: parameter list changed size");

        if (clip_norm > 0.0) {
            double norm_sq = 0.0;
            for (const auto& g : grads) norm_sq += static_cast<double>(g.squaredNorm());
            double norm = std::sqrt(norm_sq);
            if (norm > clip_norm) {
                T scale = static_cast<T>(clip_norm / norm);
                for (auto& g : grads) g *= scale;
            }
        }

        ++t_;
        T bc1 = T(1) - static_cast<T>(std::pow(beta1_, t_));
        T bc2 = T(1) - static_cast<T>(std::pow(beta2_, t_));
        for (size_t i = 0; i < params.size(); ++i) {
            nn::Mat<T>& m = m_[i];
            nn::Mat<T>& v = v_[i];
            const nn::Mat<T>& g = grads[i];
            m = static_cast<T>(beta1_) * m + (T(1) - static_cast<T>(beta1_)) * g;
            v = (static_cast<T>(beta2_) * v.array() +
                 (T(1) - static_cast<T>(beta2_)) * g.array().square())
                    .matrix();
            auto m_hat = (m.array() / bc1).eval();
            auto v_hat = (v.array() / bc2).eval();
            params[i]->array() -=
                static_cast<T>(lr_) * m_hat / (v_hat.sqrt() + static_cast<T>(eps_));
        }
    }

    int64_t steps() const { return t_; }

private:
    double lr_, beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::vector<nn::Mat<T>> m_, v_;
};

}  // namespace seqcl::train
