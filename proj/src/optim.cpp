#include "skel/optim.hpp"

#include "skel/error.hpp"

namespace skel {

void SgdState::step(Graph& g) {
    if (learning_rate <= 0) throw ArgError("sgd: learning rate must be positive");
    if (momentum < 0 || momentum >= 1) throw ArgError("sgd: momentum must be in [0,1)");
    for (const auto& [name, id] : g.params()) {
        Tensor& p = g.val(id);
        p.ensure_grad();
        auto& v = velocity[name];
        if (v.size() != p.data.size()) v.assign(p.data.size(), 0.0);
        for (size_t i = 0; i < p.data.size(); ++i) {
            v[i] = momentum * v[i] + p.grad[i];
            p.data[i] -= learning_rate * v[i];
        }
    }
    ++iteration;
    if (lr_decay_every > 0 && iteration % lr_decay_every == 0) learning_rate *= lr_decay_factor;
}

}  // namespace skel
