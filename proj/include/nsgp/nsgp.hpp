#pragma once

#include "nsgp/active.hpp"
#include "nsgp/cli.hpp"
#include "nsgp/data.hpp"
#include "nsgp/errors.hpp"
#include "nsgp/eval.hpp"
#include "nsgp/gradcheck.hpp"
#include "nsgp/gradient.hpp"
#include "nsgp/kernels.hpp"
#include "nsgp/latent.hpp"
#include "nsgp/model.hpp"
#include "nsgp/model_io.hpp"
#include "nsgp/numerics.hpp"
#include "nsgp/rng.hpp"
#include "nsgp/train.hpp"
