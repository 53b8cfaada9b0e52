#include "optonet/matching.hpp"

#include <algorithm>
#include <cassert>

#include "optonet/errors.hpp"

namespace optonet {

namespace {

// Primal-dual blossom matching over an explicit edge list. Vertices are
// 0..n-1, blossom slots n..2n-1. Edge endpoints are addressed as 2k / 2k+1
// so that p^1 flips to the other side of edge k.
class Matcher {
 public:
  Matcher(int n, const std::vector<std::tuple<int, int, double>>& edges,
          bool max_cardinality)
      : n_(n), edges_(edges), maxcard_(max_cardinality) {}

  std::vector<int> solve() {
    const int m = static_cast<int>(edges_.size());
    double maxweight = 0;
    for (auto& [i, j, w] : edges_) maxweight = std::max(maxweight, w);

    endpoint_.resize(2 * m);
    for (int p = 0; p < 2 * m; ++p)
      endpoint_[p] = (p & 1) ? std::get<1>(edges_[p / 2])
                             : std::get<0>(edges_[p / 2]);
    neighbend_.assign(n_, {});
    for (int k = 0; k < m; ++k) {
      neighbend_[std::get<0>(edges_[k])].push_back(2 * k + 1);
      neighbend_[std::get<1>(edges_[k])].push_back(2 * k);
    }

    mate_.assign(n_, -1);
    label_.assign(2 * n_, 0);
    labelend_.assign(2 * n_, -1);
    inblossom_.resize(n_);
    for (int v = 0; v < n_; ++v) inblossom_[v] = v;
    blossomparent_.assign(2 * n_, -1);
    blossomchilds_.assign(2 * n_, {});
    blossombase_.assign(2 * n_, -1);
    for (int v = 0; v < n_; ++v) blossombase_[v] = v;
    blossomendps_.assign(2 * n_, {});
    bestedge_.assign(2 * n_, -1);
    blossombestedges_.assign(2 * n_, {});
    has_bestedges_.assign(2 * n_, false);
    unusedblossoms_.clear();
    for (int b = n_; b < 2 * n_; ++b) unusedblossoms_.push_back(b);
    dualvar_.assign(2 * n_, 0.0);
    for (int v = 0; v < n_; ++v) dualvar_[v] = maxweight;
    allowedge_.assign(m, false);

    for (int stage = 0; stage < n_; ++stage) {
      std::fill(label_.begin(), label_.end(), 0);
      std::fill(bestedge_.begin(), bestedge_.end(), -1);
      for (int b = n_; b < 2 * n_; ++b) {
        blossombestedges_[b].clear();
        has_bestedges_[b] = false;
      }
      std::fill(allowedge_.begin(), allowedge_.end(), false);
      queue_.clear();

      for (int v = 0; v < n_; ++v)
        if (mate_[v] == -1 && label_[inblossom_[v]] == 0) assign_label(v, 1, -1);

      bool augmented = false;
      while (true) {
        while (!queue_.empty() && !augmented) {
          int v = queue_.back();
          queue_.pop_back();
          for (int p : neighbend_[v]) {
            int k = p / 2;
            int w = endpoint_[p];
            if (inblossom_[v] == inblossom_[w]) continue;
            double kslack = 0;
            if (!allowedge_[k]) {
              kslack = slack(k);
              if (kslack <= 0) allowedge_[k] = true;
            }
            if (allowedge_[k]) {
              if (label_[inblossom_[w]] == 0) {
                assign_label(w, 2, p ^ 1);
              } else if (label_[inblossom_[w]] == 1) {
                int base = scan_blossom(v, w);
                if (base >= 0) {
                  add_blossom(base, k);
                } else {
                  augment_matching(k);
                  augmented = true;
                  break;
                }
              } else if (label_[w] == 0) {
                label_[w] = 2;
                labelend_[w] = p ^ 1;
              }
            } else if (label_[inblossom_[w]] == 1) {
              int b = inblossom_[v];
              if (bestedge_[b] == -1 || kslack < slack(bestedge_[b]))
                bestedge_[b] = k;
            } else if (label_[w] == 0) {
              if (bestedge_[w] == -1 || kslack < slack(bestedge_[w]))
                bestedge_[w] = k;
            }
          }
        }
        if (augmented) break;

        int deltatype = -1;
        double delta = 0;
        int deltaedge = -1, deltablossom = -1;
        if (!maxcard_) {
          deltatype = 1;
          delta = *std::min_element(dualvar_.begin(), dualvar_.begin() + n_);
        }
        for (int v = 0; v < n_; ++v) {
          if (label_[inblossom_[v]] == 0 && bestedge_[v] != -1) {
            double d = slack(bestedge_[v]);
            if (deltatype == -1 || d < delta) {
              delta = d;
              deltatype = 2;
              deltaedge = bestedge_[v];
            }
          }
        }
        for (int b = 0; b < 2 * n_; ++b) {
          if (blossomparent_[b] == -1 && label_[b] == 1 && bestedge_[b] != -1) {
            double d = slack(bestedge_[b]) / 2;
            if (deltatype == -1 || d < delta) {
              delta = d;
              deltatype = 3;
              deltaedge = bestedge_[b];
            }
          }
        }
        for (int b = n_; b < 2 * n_; ++b) {
          if (blossombase_[b] >= 0 && blossomparent_[b] == -1 &&
              label_[b] == 2 && (deltatype == -1 || dualvar_[b] < delta)) {
            delta = dualvar_[b];
            deltatype = 4;
            deltablossom = b;
          }
        }
        if (deltatype == -1) {
          // Max-cardinality optimum reached; final update keeps duals sane.
          deltatype = 1;
          delta = std::max(
              0.0, *std::min_element(dualvar_.begin(), dualvar_.begin() + n_));
        }

        for (int v = 0; v < n_; ++v) {
          if (label_[inblossom_[v]] == 1)
            dualvar_[v] -= delta;
          else if (label_[inblossom_[v]] == 2)
            dualvar_[v] += delta;
        }
        for (int b = n_; b < 2 * n_; ++b) {
          if (blossombase_[b] >= 0 && blossomparent_[b] == -1) {
            if (label_[b] == 1)
              dualvar_[b] += delta;
            else if (label_[b] == 2)
              dualvar_[b] -= delta;
          }
        }

        if (deltatype == 1) {
          break;
        } else if (deltatype == 2) {
          allowedge_[deltaedge] = true;
          int i = std::get<0>(edges_[deltaedge]);
          int j = std::get<1>(edges_[deltaedge]);
          if (label_[inblossom_[i]] == 0) std::swap(i, j);
          queue_.push_back(i);
          (void)j;
        } else if (deltatype == 3) {
          allowedge_[deltaedge] = true;
          queue_.push_back(std::get<0>(edges_[deltaedge]));
        } else {
          expand_blossom(deltablossom, false);
        }
      }

      if (!augmented) break;
      for (int b = n_; b < 2 * n_; ++b) {
        if (blossomparent_[b] == -1 && blossombase_[b] >= 0 &&
            label_[b] == 1 && dualvar_[b] == 0)
          expand_blossom(b, true);
      }
    }

    std::vector<int> mate(n_, -1);
    for (int v = 0; v < n_; ++v)
      if (mate_[v] >= 0) mate[v] = endpoint_[mate_[v]];
    return mate;
  }

 private:
  double slack(int k) const {
    return dualvar_[std::get<0>(edges_[k])] + dualvar_[std::get<1>(edges_[k])] -
           2 * std::get<2>(edges_[k]);
  }

  void blossom_leaves(int b, std::vector<int>& out) const {
    if (b < n_) {
      out.push_back(b);
    } else {
      for (int t : blossomchilds_[b]) blossom_leaves(t, out);
    }
  }

  void assign_label(int w, int t, int p) {
    int b = inblossom_[w];
    assert(label_[w] == 0 && label_[b] == 0);
    label_[w] = label_[b] = t;
    labelend_[w] = labelend_[b] = p;
    bestedge_[w] = bestedge_[b] = -1;
    if (t == 1) {
      std::vector<int> leaves;
      blossom_leaves(b, leaves);
      queue_.insert(queue_.end(), leaves.begin(), leaves.end());
    } else {
      int base = blossombase_[b];
      assert(mate_[base] >= 0);
      assign_label(endpoint_[mate_[base]], 1, mate_[base] ^ 1);
    }
  }

  int scan_blossom(int v, int w) {
    std::vector<int> path;
    int base = -1;
    while (v != -1 || w != -1) {
      int b = inblossom_[v];
      if (label_[b] & 4) {
        base = blossombase_[b];
        break;
      }
      path.push_back(b);
      label_[b] = 5;
      if (labelend_[b] == -1) {
        v = -1;
      } else {
        v = endpoint_[labelend_[b]];
        b = inblossom_[v];
        assert(label_[b] == 2);
        v = endpoint_[labelend_[b]];
      }
      if (w != -1) std::swap(v, w);
    }
    for (int b : path) label_[b] = 1;
    return base;
  }

  void add_blossom(int base, int k) {
    int v = std::get<0>(edges_[k]);
    int w = std::get<1>(edges_[k]);
    int bb = inblossom_[base];
    int bv = inblossom_[v];
    int bw = inblossom_[w];
    int b = unusedblossoms_.back();
    unusedblossoms_.pop_back();
    blossombase_[b] = base;
    blossomparent_[b] = -1;
    blossomparent_[bb] = b;
    std::vector<int> path, endps;
    while (bv != bb) {
      blossomparent_[bv] = b;
      path.push_back(bv);
      endps.push_back(labelend_[bv]);
      v = endpoint_[labelend_[bv]];
      bv = inblossom_[v];
    }
    path.push_back(bb);
    std::reverse(path.begin(), path.end());
    std::reverse(endps.begin(), endps.end());
    endps.push_back(2 * k);
    while (bw != bb) {
      blossomparent_[bw] = b;
      path.push_back(bw);
      endps.push_back(labelend_[bw] ^ 1);
      w = endpoint_[labelend_[bw]];
      bw = inblossom_[w];
    }
    blossomchilds_[b] = path;
    blossomendps_[b] = endps;
    assert(label_[bb] == 1);
    label_[b] = 1;
    labelend_[b] = labelend_[bb];
    dualvar_[b] = 0;
    std::vector<int> leaves;
    blossom_leaves(b, leaves);
    for (int lv : leaves) {
      if (label_[inblossom_[lv]] == 2) queue_.push_back(lv);
      inblossom_[lv] = b;
    }
    std::vector<int> bestedgeto(2 * n_, -1);
    for (int pb : path) {
      std::vector<std::vector<int>> nblists;
      if (!has_bestedges_[pb]) {
        std::vector<int> pl;
        blossom_leaves(pb, pl);
        for (int lv : pl) {
          std::vector<int> ks;
          for (int p : neighbend_[lv]) ks.push_back(p / 2);
          nblists.push_back(std::move(ks));
        }
      } else {
        nblists.push_back(blossombestedges_[pb]);
      }
      for (auto& nblist : nblists) {
        for (int ek : nblist) {
          int i = std::get<0>(edges_[ek]);
          int j = std::get<1>(edges_[ek]);
          if (inblossom_[j] == b) std::swap(i, j);
          int bj = inblossom_[j];
          if (bj != b && label_[bj] == 1 &&
              (bestedgeto[bj] == -1 || slack(ek) < slack(bestedgeto[bj])))
            bestedgeto[bj] = ek;
        }
      }
      blossombestedges_[pb].clear();
      has_bestedges_[pb] = false;
      bestedge_[pb] = -1;
    }
    blossombestedges_[b].clear();
    for (int ek : bestedgeto)
      if (ek != -1) blossombestedges_[b].push_back(ek);
    has_bestedges_[b] = true;
    bestedge_[b] = -1;
    for (int ek : blossombestedges_[b])
      if (bestedge_[b] == -1 || slack(ek) < slack(bestedge_[b]))
        bestedge_[b] = ek;
  }

  // Modular indexing into a blossom's child list; python-style negative
  // indices appear while walking around the cycle.
  static int wrap(int idx, int size) { return ((idx % size) + size) % size; }
  int child(int b, int j) const {
    return blossomchilds_[b][wrap(j, static_cast<int>(blossomchilds_[b].size()))];
  }
  int endp(int b, int j) const {
    return blossomendps_[b][wrap(j, static_cast<int>(blossomendps_[b].size()))];
  }

  void expand_blossom(int b, bool endstage) {
    for (int s : blossomchilds_[b]) {
      blossomparent_[s] = -1;
      if (s < n_) {
        inblossom_[s] = s;
      } else if (endstage && dualvar_[s] == 0) {
        expand_blossom(s, endstage);
      } else {
        std::vector<int> leaves;
        blossom_leaves(s, leaves);
        for (int v : leaves) inblossom_[v] = s;
      }
    }
    if (!endstage && label_[b] == 2) {
      assert(labelend_[b] >= 0);
      int entrychild = inblossom_[endpoint_[labelend_[b] ^ 1]];
      int size = static_cast<int>(blossomchilds_[b].size());
      int j = 0;
      for (int idx = 0; idx < size; ++idx)
        if (blossomchilds_[b][idx] == entrychild) {
          j = idx;
          break;
        }
      int jstep, endptrick;
      if (j & 1) {
        j -= size;
        jstep = 1;
        endptrick = 0;
      } else {
        jstep = -1;
        endptrick = 1;
      }
      int p = labelend_[b];
      while (j != 0) {
        label_[endpoint_[p ^ 1]] = 0;
        label_[endpoint_[endp(b, j - endptrick) ^ endptrick ^ 1]] = 0;
        assign_label(endpoint_[p ^ 1], 2, p);
        allowedge_[endp(b, j - endptrick) / 2] = true;
        j += jstep;
        p = endp(b, j - endptrick) ^ endptrick;
        allowedge_[p / 2] = true;
        j += jstep;
      }
      int bv = child(b, j);
      label_[endpoint_[p ^ 1]] = label_[bv] = 2;
      labelend_[endpoint_[p ^ 1]] = labelend_[bv] = p;
      bestedge_[bv] = -1;
      j += jstep;
      while (child(b, j) != entrychild) {
        bv = child(b, j);
        if (label_[bv] == 1) {
          j += jstep;
          continue;
        }
        std::vector<int> leaves;
        blossom_leaves(bv, leaves);
        int lv = leaves.front();
        for (int cand : leaves) {
          lv = cand;
          if (label_[cand] != 0) break;
        }
        if (label_[lv] != 0) {
          assert(label_[lv] == 2);
          assert(inblossom_[lv] == bv);
          label_[lv] = 0;
          label_[endpoint_[mate_[blossombase_[bv]]]] = 0;
          assign_label(lv, 2, labelend_[lv]);
        }
        j += jstep;
      }
    }
    label_[b] = -1;
    labelend_[b] = -1;
    blossomchilds_[b].clear();
    blossomendps_[b].clear();
    blossombase_[b] = -1;
    blossombestedges_[b].clear();
    has_bestedges_[b] = false;
    bestedge_[b] = -1;
    unusedblossoms_.push_back(b);
  }

  void augment_blossom(int b, int v) {
    int t = v;
    while (blossomparent_[t] != b) t = blossomparent_[t];
    if (t >= n_) augment_blossom(t, v);
    int size = static_cast<int>(blossomchilds_[b].size());
    int i = 0;
    for (int idx = 0; idx < size; ++idx)
      if (blossomchilds_[b][idx] == t) {
        i = idx;
        break;
      }
    int j = i, jstep, endptrick;
    if (i & 1) {
      j -= size;
      jstep = 1;
      endptrick = 0;
    } else {
      jstep = -1;
      endptrick = 1;
    }
    while (j != 0) {
      j += jstep;
      t = child(b, j);
      int p = endp(b, j - endptrick) ^ endptrick;
      if (t >= n_) augment_blossom(t, endpoint_[p]);
      j += jstep;
      t = child(b, j);
      if (t >= n_) augment_blossom(t, endpoint_[p ^ 1]);
      mate_[endpoint_[p]] = p ^ 1;
      mate_[endpoint_[p ^ 1]] = p;
    }
    std::rotate(blossomchilds_[b].begin(), blossomchilds_[b].begin() + i,
                blossomchilds_[b].end());
    std::rotate(blossomendps_[b].begin(), blossomendps_[b].begin() + i,
                blossomendps_[b].end());
    blossombase_[b] = blossombase_[blossomchilds_[b][0]];
    assert(blossombase_[b] == v);
  }

  void augment_matching(int k) {
    int v = std::get<0>(edges_[k]);
    int w = std::get<1>(edges_[k]);
    for (auto [s, p] : {std::pair{v, 2 * k + 1}, std::pair{w, 2 * k}}) {
      while (true) {
        int bs = inblossom_[s];
        assert(label_[bs] == 1);
        assert(labelend_[bs] == mate_[blossombase_[bs]]);
        if (bs >= n_) augment_blossom(bs, s);
        mate_[s] = p;
        if (labelend_[bs] == -1) break;
        int t = endpoint_[labelend_[bs]];
        int bt = inblossom_[t];
        assert(label_[bt] == 2);
        assert(labelend_[bt] >= 0);
        s = endpoint_[labelend_[bt]];
        int j = endpoint_[labelend_[bt] ^ 1];
        assert(blossombase_[bt] == t);
        if (bt >= n_) augment_blossom(bt, j);
        mate_[j] = labelend_[bt];
        p = labelend_[bt] ^ 1;
      }
    }
  }

  int n_;
  const std::vector<std::tuple<int, int, double>>& edges_;
  bool maxcard_;

  std::vector<int> endpoint_;
  std::vector<std::vector<int>> neighbend_;
  std::vector<int> mate_;
  std::vector<int> label_;
  std::vector<int> labelend_;
  std::vector<int> inblossom_;
  std::vector<int> blossomparent_;
  std::vector<std::vector<int>> blossomchilds_;
  std::vector<int> blossombase_;
  std::vector<std::vector<int>> blossomendps_;
  std::vector<int> bestedge_;
  std::vector<std::vector<int>> blossombestedges_;
  std::vector<char> has_bestedges_;
  std::vector<int> unusedblossoms_;
  std::vector<double> dualvar_;
  std::vector<char> allowedge_;
  std::vector<int> queue_;
};

}  // namespace

std::vector<int> max_weight_matching(
    int n, const std::vector<std::tuple<int, int, double>>& edges,
    bool max_cardinality) {
  if (n <= 0 || edges.empty()) return std::vector<int>(std::max(n, 0), -1);
  Matcher m(n, edges, max_cardinality);
  return m.solve();
}

std::vector<Circuit> edmonds_matching(const TrafficMatrix& tm) {
  const int n = static_cast<int>(tm.size());
  if (n % 2 != 0)
    throw InvalidNodeCountError("perfect matching needs an even node count");
  std::vector<std::tuple<int, int, double>> edges;
  edges.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      edges.emplace_back(i, j, tm.pair_demand(i, j));
  auto mate = max_weight_matching(n, edges, /*max_cardinality=*/true);
  std::vector<Circuit> out;
  for (int i = 0; i < n; ++i)
    if (mate[i] > i) out.emplace_back(i, 0, mate[i], 0);
  return out;
}

}  // namespace optonet
