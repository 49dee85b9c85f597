#include "refnet/tensor.hpp"

#include <unordered_set>

#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace refnet::nn {

namespace {
thread_local bool g_grad_enabled = true;

// Tensor buffers run to a few MB; keep them on the heap free lists instead
// of round-tripping through mmap on every op.
const bool g_malloc_tuned = [] {
#ifdef __GLIBC__
    mallopt(M_MMAP_THRESHOLD, 512 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 512 * 1024 * 1024);
#endif
    return true;
}();
} // namespace

bool grad_enabled() { return g_grad_enabled; }

GradMode::GradMode(bool enable) : prev_(g_grad_enabled) { g_grad_enabled = enable; }
GradMode::~GradMode() { g_grad_enabled = prev_; }

Tensor Tensor::full(const Shape& s, Scalar v) {
    auto n = std::make_shared<Node>();
    n->shape = s;
    n->data.assign(static_cast<std::size_t>(shape_numel(s)), v);
    return Tensor(std::move(n));
}

Tensor Tensor::from_data(const Shape& s, std::vector<Scalar> data) {
    if (static_cast<int>(data.size()) != shape_numel(s))
        throw std::invalid_argument("Tensor::from_data: size mismatch");
    auto n = std::make_shared<Node>();
    n->shape = s;
    n->data = std::move(data);
    return Tensor(std::move(n));
}

Tensor Tensor::leaf(const Shape& s, std::vector<Scalar> data, bool requires_grad) {
    Tensor t = from_data(s, std::move(data));
    t.node()->requires_grad = requires_grad;
    t.node()->needs_grad = requires_grad;
    return t;
}

Tensor make_op(Shape shape, std::vector<Scalar> data, std::vector<Tensor> parents,
               BackwardFn bw, const char* op) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    n->op = op;
    if (g_grad_enabled) {
        bool needs = false;
        for (const auto& p : parents)
            if (p.needs_grad()) { needs = true; break; }
        if (needs) {
            n->needs_grad = true;
            n->parents = std::move(parents);
            n->backward = std::move(bw);
        }
    }
    return Tensor(std::move(n));
}

GradMap backward(const Tensor& root, bool create_graph) {
    if (root.numel() != 1) throw std::logic_error("backward: root must be a scalar");
    GradMap gm;
    if (!root.needs_grad()) return gm;

    // postorder DFS: parents land before consumers
    std::vector<Node*> topo;
    std::unordered_set<Node*> visited;
    struct Frame {
        Node* n;
        std::size_t next = 0;
    };
    std::vector<Frame> st;
    st.push_back({root.node()});
    visited.insert(root.node());
    while (!st.empty()) {
        Frame& f = st.back();
        if (f.next < f.n->parents.size()) {
            Node* p = f.n->parents[f.next++].node();
            if (p->needs_grad && !visited.count(p)) {
                visited.insert(p);
                st.push_back({p});
            }
        } else {
            topo.push_back(f.n);
            st.pop_back();
        }
    }

    auto& grads = gm.raw();
    grads[root.node()] = Tensor::full(root.shape(), 1.0);
    GradMode mode(create_graph);
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        Node* n = *it;
        auto git = grads.find(n);
        if (git == grads.end() || !n->backward) continue;
        const Tensor g = git->second;
        std::vector<Tensor> pg = n->backward(g);
        if (pg.size() != n->parents.size())
            throw std::logic_error(std::string("backward of ") + n->op + ": arity mismatch");
        for (std::size_t i = 0; i < pg.size(); ++i) {
            if (!pg[i].defined()) continue;
            Node* p = n->parents[i].node();
            if (!p->needs_grad) continue;
            if (pg[i].numel() != shape_numel(p->shape))
                throw std::logic_error(std::string("backward of ") + n->op + ": shape mismatch");
            auto pit = grads.find(p);
            if (pit == grads.end())
                grads.emplace(p, pg[i]);
            else
                pit->second = add(pit->second, pg[i]);
        }
    }
    return gm;
}

} // namespace refnet::nn
