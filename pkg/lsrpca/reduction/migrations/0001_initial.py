# Generated by Django 5.1.11 on 2026-10-16 09:12

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='Experiment',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('name', models.CharField(help_text='Label of the experiment', max_length=255, verbose_name='Name')),
                ('config_text', models.TextField(help_text='Pipeline config file the sweep runs with', verbose_name='Config')),
                ('config_dir', models.CharField(blank=True, default='', help_text='Directory relative paths in the config resolve against', max_length=1024, verbose_name='Config directory')),
                ('root_seed', models.BigIntegerField(help_text='Seed every sub-seed of the sweep derives from', verbose_name='Root seed')),
                ('status', models.CharField(choices=[('PENDING', 'PENDING'), ('RUNNING', 'RUNNING'), ('COMPLETED', 'COMPLETED'), ('FAILED', 'FAILED')], default='PENDING', max_length=30, verbose_name='Status')),
                ('output_dir', models.CharField(blank=True, default='', max_length=1024, verbose_name='Output directory')),
                ('error_message', models.TextField(blank=True, null=True, verbose_name='Error Message')),
                ('created_at', models.DateTimeField(auto_now_add=True, verbose_name='Created at')),
                ('started_at', models.DateTimeField(blank=True, null=True, verbose_name='Started at')),
                ('finished_at', models.DateTimeField(blank=True, null=True, verbose_name='Finished at')),
            ],
            options={
                'verbose_name': 'Experiment',
                'verbose_name_plural': 'Experiments',
                'ordering': ['-created_at'],
            },
        ),
        migrations.CreateModel(
            name='ExperimentCell',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('method', models.CharField(max_length=30, verbose_name='Method')),
                ('k', models.PositiveIntegerField(verbose_name='K')),
                ('kbar', models.PositiveIntegerField(blank=True, null=True, verbose_name='Oversampled K')),
                ('oversampling', models.CharField(max_length=30, verbose_name='Oversampling')),
                ('seed', models.BigIntegerField(verbose_name='Seed')),
                ('fold', models.PositiveIntegerField(verbose_name='Fold')),
                ('fit_rows', models.PositiveBigIntegerField(default=0, verbose_name='Fit rows')),
                ('log_loss', models.FloatField(blank=True, null=True, verbose_name='Log loss')),
                ('error_rate', models.FloatField(blank=True, null=True, verbose_name='Error rate')),
                ('status', models.CharField(choices=[('ok', 'ok'), ('failed', 'failed')], default='ok', max_length=30, verbose_name='Status')),
                ('error_message', models.TextField(blank=True, default='', verbose_name='Error Message')),
                ('experiment', models.ForeignKey(help_text='The experiment this cell belongs to', on_delete=django.db.models.deletion.CASCADE, related_name='cells', to='reduction.experiment')),
            ],
            options={
                'verbose_name': 'Experiment Cell',
                'verbose_name_plural': 'Experiment Cells',
                'ordering': ['experiment', 'k', 'method', 'oversampling', 'seed', 'fold'],
            },
        ),
    ]
