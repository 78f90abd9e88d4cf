#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <sstream>

#include "cpb/bench.hpp"
#include "cpb/harness.hpp"
#include "cpb/predictor.hpp"
#include "cpb/psi.hpp"
#include "cpb/sketch.hpp"

namespace py = pybind11;
using namespace cpb;

namespace {

py::object optional_float(const std::optional<double>& v) {
  return v ? py::object(py::float_(*v)) : py::object(py::none());
}

KeyValueConfig to_kv(const std::map<std::string, std::string>& options) {
  KeyValueConfig kv;
  for (const auto& [k, v] : options) kv.set(k, v);
  return kv;
}

py::dict summary_dict(const SummaryRow& s) {
  py::dict d;
  d["method"] = s.method;
  d["k"] = s.k;
  d["strategy"] = s.strategy;
  d["backend"] = s.backend;
  d["windows"] = s.windows;
  d["tp"] = optional_float(s.tp);
  d["fp"] = optional_float(s.fp);
  d["fn"] = optional_float(s.fn);
  d["tpr"] = optional_float(s.tpr);
  d["ppv"] = optional_float(s.ppv);
  d["f1"] = optional_float(s.f1);
  d["tp_impr"] = optional_float(s.tp_impr);
  d["fp_incr"] = optional_float(s.fp_incr);
  d["fn_incr"] = optional_float(s.fn_incr);
  d["cluster_size"] = optional_float(s.cluster_size);
  d["collaborators"] = optional_float(s.collaborators);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Collaborative predictive blacklisting core";

  m.def(
      "ewma_forecast", [](const std::vector<double>& series, double alpha) { return ewma_forecast(series, alpha); },
      py::arg("series"), py::arg("alpha"));

  m.def(
      "size_sketch",
      [](double epsilon, double delta, uint64_t domain) {
        const auto p = size_sketch(epsilon, delta, domain);
        py::dict d;
        d["width"] = p.width;
        d["depth"] = p.depth;
        d["cells"] = p.cells();
        return d;
      },
      py::arg("epsilon"), py::arg("delta"), py::arg("domain"));

  m.def(
      "psi_ca",
      [](const std::vector<PsiElement>& client, const std::vector<PsiElement>& server, const std::string& group,
         std::optional<uint64_t> seed) {
        py::gil_scoped_release release;
        return psi_ca(client, server, PsiOptions{parse_group_id(group), seed}).cardinality;
      },
      py::arg("client"), py::arg("server"), py::arg("group") = "ristretto255", py::arg("seed") = py::none(),
      "Size of the intersection, learned by the client.");

  m.def(
      "psi_dt",
      [](const std::vector<PsiElement>& client, const std::map<PsiElement, py::bytes>& server, const std::string& group,
         std::optional<uint64_t> seed) {
        PsiRecords records;
        for (const auto& [e, b] : server) {
          const std::string s = b;
          records.emplace(e, Bytes(s.begin(), s.end()));
        }
        PsiDtOutcome out;
        {
          py::gil_scoped_release release;
          out = psi_dt(client, records, PsiOptions{parse_group_id(group), seed});
        }
        py::dict d;
        for (const auto& [e, data] : out.records) {
          d[py::int_(e)] = py::bytes(reinterpret_cast<const char*>(data.data()), data.size());
        }
        return d;
      },
      py::arg("client"), py::arg("server"), py::arg("group") = "ristretto255", py::arg("seed") = py::none(),
      "Server records whose keys the client holds.");

  m.def(
      "run_experiment",
      [](const std::map<std::string, std::string>& options) {
        auto config = ExperimentConfig::from_config(to_kv(options));
        RunOutput out;
        {
          py::gil_scoped_release release;
          out = run_experiment(config, load_windows(config));
        }
        py::list rows;
        for (const auto& s : out.summary) rows.append(summary_dict(s));
        return rows;
      },
      py::arg("options"), "Runs an experiment from key=value options and returns the summary rows.");

  m.def(
      "bench",
      [](const std::string& protocol, const std::vector<size_t>& sizes, const std::vector<size_t>& orgs, size_t repeats) {
        BenchConfig c;
        c.protocol = parse_bench_protocol(protocol);
        c.sizes = sizes;
        c.orgs = orgs;
        c.repeats = repeats;
        std::vector<BenchRow> rows;
        {
          py::gil_scoped_release release;
          rows = bench(c);
        }
        py::list out;
        for (const auto& r : rows) {
          py::dict d;
          d["protocol"] = r.protocol;
          d["group"] = r.group;
          d["orgs"] = r.orgs;
          d["set_size"] = r.set_size;
          d["org_seconds"] = r.org_seconds;
          d["org_bytes"] = r.org_bytes;
          d["sta_seconds"] = r.sta_seconds;
          d["sta_bytes"] = r.sta_bytes;
          out.append(d);
        }
        return out;
      },
      py::arg("protocol"), py::arg("sizes"), py::arg("orgs"), py::arg("repeats") = 1);
}
