# Generated by Django 5.2.9 on 2026-10-19 09:12

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):
    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="Experiment",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                ("name", models.CharField(max_length=100)),
                ("methods", models.JSONField(default=list)),
                ("config", models.JSONField(default=dict)),
                ("output_dir", models.CharField(max_length=500)),
                ("created_at", models.DateTimeField(auto_now_add=True)),
            ],
            options={
                "ordering": ["-created_at", "-id"],
            },
        ),
        migrations.CreateModel(
            name="Run",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                ("method", models.CharField(max_length=50)),
                ("seed", models.IntegerField()),
                (
                    "status",
                    models.CharField(
                        choices=[
                            ("running", "Running"),
                            ("completed", "Completed"),
                            ("aborted", "Aborted"),
                        ],
                        default="running",
                        max_length=20,
                    ),
                ),
                ("metrics_path", models.CharField(max_length=500)),
                ("steps_completed", models.IntegerField(default=0)),
                ("final_train_loss", models.FloatField(blank=True, null=True)),
                ("peak_test_accuracy", models.FloatField(blank=True, null=True)),
                ("diagnostic", models.TextField(blank=True, default="")),
                ("started_at", models.DateTimeField(auto_now_add=True)),
                ("finished_at", models.DateTimeField(blank=True, null=True)),
                (
                    "experiment",
                    models.ForeignKey(
                        on_delete=django.db.models.deletion.CASCADE,
                        related_name="runs",
                        to="lab.experiment",
                    ),
                ),
            ],
            options={
                "ordering": ["experiment", "method", "seed"],
                "unique_together": {("experiment", "method", "seed")},
            },
        ),
    ]
