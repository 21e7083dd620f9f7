use hno::datagen::{generate_burgers, BurgersGen, Problem};
use hno::operator::LayerKind;
use hno::training::{desk_config, train};

#[test]
fn burgers_loss_trends_down_over_first_30_epochs() {
    let data = generate_burgers(&BurgersGen::default()).unwrap();
    let mut cfg = desk_config(Problem::Burgers1d, LayerKind::Hno, 0);
    cfg.epochs = 30;
    let (_, report) = train(&data, &cfg).unwrap();
    assert!(!report.diverged);
    let loss: Vec<f64> = report.epochs.iter().map(|r| r.train_loss).collect();
    let ma: Vec<f64> = loss
        .windows(5)
        .map(|w| w.iter().sum::<f64>() / 5.0)
        .collect();
    // ma[i] averages epochs i+1..=i+5
    assert!(ma.last().unwrap() < &ma[0], "{ma:?}");
    let n = ma.len() as f64;
    let xm = (n - 1.0) / 2.0;
    let ym = ma.iter().sum::<f64>() / n;
    let slope: f64 = ma
        .iter()
        .enumerate()
        .map(|(i, y)| (i as f64 - xm) * (y - ym))
        .sum::<f64>();
    assert!(slope < 0.0, "{ma:?}");
}

#[test]
fn zero_learning_rate_freezes_validation_error() {
    let data = generate_burgers(&BurgersGen {
        samples: 20,
        n: 64,
        ..Default::default()
    })
    .unwrap();
    let mut cfg = desk_config(Problem::Burgers1d, LayerKind::Fno, 3);
    cfg.epochs = 1;
    cfg.adam.lr = 0.0;
    cfg.model.width = 8;
    cfg.model.proj_width = 16;
    cfg.model.modes = vec![8];
    let (_, report) = train(&data, &cfg).unwrap();
    assert_eq!(report.epochs[0].val_rel_l2, report.initial_val_rel_l2);
}
