#pragma once

#include "errors.hpp"
#include "dft.hpp"
#include "spectral_model.hpp"
#include "quadrature.hpp"
#include "acov.hpp"
#include "toeplitz.hpp"
#include "lowrank.hpp"
#include "whittle.hpp"
#include "dplr_likelihood.hpp"
#include "dense_oracle.hpp"
#include "simulate.hpp"
#include "fit.hpp"
