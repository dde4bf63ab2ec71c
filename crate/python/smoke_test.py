"""Quick check that the extension module loads and agrees with the CLI."""

import contractbench_py as cb

p = cb.Program.corpus("P1")
assert len(p) == 7, len(p)
assert "P2'f" in cb.Program.corpus_names()

regs, mem = p.run({0: 1, 1: 2, 5: 3})
assert regs["x"] == "1", regs

prog = cb.Program("x <- y < size_A\nbeqz x, end\nload z, A + y\n")
assert len(prog.trace("seq-ct", window=6)) >= 1
assert prog.trace("top") == []

views = p.hw_run({0: 3, 1: 2}, countermeasure="loaddelay")
assert views and all(v.startswith("buf=") for v in views), views[:2]

row = cb.classify("sandbox", "P1")
assert row == {"seq-ct": "Y,⊒", "seq-arch": "Y,⊒", "spec-ct": "N", "spec-pc-ct": "Y,wSNI"}, row

cex = cb.check_sat(cb.Program.corpus("ex2"), "seq-ct", "loaddelay",
                   config="scheduler = eager\nbuffer_size = 8",
                   domain_text="vary 26 in 0..2")
assert cex is not None and int(cex["position"]) >= 1, cex
assert cb.check_sat(cb.Program.corpus("P1"), "spec-ct", "none") is None

try:
    cb.Program("load x")
except ValueError:
    pass
else:
    raise AssertionError("malformed program accepted")

print("python smoke test: ok")
