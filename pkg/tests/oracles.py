"""Frozen expected values used by the test suite.

Every constant here was computed independently of the library, either
by hand or with a high-precision evaluation of a closed form, and then
frozen. Tests compare library output against these numbers; none of
them were produced by running the code under test.
"""

import math

# hyperbolic functions at 1, correct to the last float64 digit
COSH_1 = 1.5430806348152437
SINH_1 = 1.1752011936438014

# tanh(2) and the hyperbolic functions at tanh(2): the image of the
# point [cosh 2, sinh 2] under the origin-tangent tanh contraction
TANH_2 = 0.9640275800758169
COSH_TANH_2 = 1.5017951784198396
SINH_TANH_2 = 1.1204413228389418

COSH_2 = 3.7621956910836314
SINH_2 = 3.6268604078470186

PI_OVER_2 = math.pi / 2.0

LN_2 = 0.6931471805599453
LN_3 = 1.0986122886681098
LN_4 = 1.3862943611198906

# -ln(0.75): cross entropy of a single node whose true class gets 0.75
NLL_075 = 0.2876820724517809

# softmax of [ln 2, 0]: exp gives [2, 1], normalize
SOFTMAX_LN2_0 = (2.0 / 3.0, 1.0 / 3.0)

# softmax of [ln 3, 0]: exp gives [3, 1], normalize
SOFTMAX_LN3_0 = (0.75, 0.25)

# sigmoid(ln 3) = 3 / (1 + 3)
SIGMOID_LN3 = 0.75

# softplus values [1, 3] normalized: 1/4 and 3/4
GATES_FROM_1_3 = (0.25, 0.75)

# inverse softplus: x with log(1 + e^x) = y, i.e. x = log(e^y - 1).
# Feeding these as raw gate scores makes the softplus outputs 1 and 3.
INV_SOFTPLUS_1 = 0.5413248546129181
INV_SOFTPLUS_3 = 2.9489308190572983

# softplus(1) and softplus(3) themselves, for normalization checks
SOFTPLUS_1 = 1.3132616875182228
SOFTPLUS_3 = 3.048587351573742

# integrate-and-fire hand simulation: v_th=1, leak=1, bias=0, constant
# per-step input 0.5, reset by subtraction. Potentials step through
# 0.5, 1.0 (spike), 0.5, 1.0 (spike): spikes at steps 2 and 4.
IF_HALF_INPUT_SPIKE_STEPS = (2, 4)   # 1-based
IF_HALF_INPUT_RATE_T4 = 0.5

# ranking AUC for positives {0.9, 0.8, 0.7} vs negatives {0.6, 0.5, 0.4}:
# every positive outranks every negative, 9 of 9 pairs
AUC_SEPARATED = 1.0
# all scores identical: every pair is a tie, counted half
AUC_ALL_TIED = 0.5

# expected SBM edge count for 2 blocks of 50, p_in=0.1, p_out=0.01:
# 2 * C(50,2) * 0.1 + 50*50 * 0.01 = 245 + 25
SBM_2X50_MEAN_EDGES = 270.0
# binomial variance: 2450*0.1*0.9 + 2500*0.01*0.99
SBM_2X50_STD_EDGES = math.sqrt(2450 * 0.1 * 0.9 + 2500 * 0.01 * 0.99)

# complete binary tree with 6 levels below the root: 2^7 - 1 nodes
TREE_DEPTH6_NODES = 127
TREE_DEPTH6_EDGES = 126
